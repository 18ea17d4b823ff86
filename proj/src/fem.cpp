#include "imfem/fem.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace imfem {

TriangleQuadrature triangle_rule(int degree) {
    switch (degree) {
    case 1:
        return {1, {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}}, {0.5}};
    case 2:
        return {2,
                {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}},
                {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0}};
    case 5: {
        const double r15 = std::sqrt(15.0);
        const double a = (6.0 - r15) / 21.0;
        const double b = (6.0 + r15) / 21.0;
        const double wa = (155.0 - r15) / 2400.0;
        const double wb = (155.0 + r15) / 2400.0;
        return {5,
                {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
                 {1.0 - 2.0 * a, a, a},
                 {a, 1.0 - 2.0 * a, a},
                 {a, a, 1.0 - 2.0 * a},
                 {1.0 - 2.0 * b, b, b},
                 {b, 1.0 - 2.0 * b, b},
                 {b, b, 1.0 - 2.0 * b}},
                {9.0 / 80.0, wa, wa, wa, wb, wb, wb}};
    }
    default:
        throw std::invalid_argument("triangle quadrature degree must be 1, 2 or 5, got " +
                                    std::to_string(degree));
    }
}

TriangleQuadrature composite_rule(const TriangleQuadrature& base, std::size_t m) {
    if (m == 0)
        throw std::invalid_argument("composite rule needs at least one subdivision");
    if (m == 1)
        return base;
    using Bary = std::array<double, 3>;
    const double inv = 1.0 / static_cast<double>(m);
    // lattice point i/m along edge 0-1, j/m along edge 0-2
    auto node = [&](std::size_t i, std::size_t j) -> Bary {
        const double a = static_cast<double>(i) * inv, b = static_cast<double>(j) * inv;
        return {1.0 - a - b, a, b};
    };
    TriangleQuadrature out;
    out.degree = base.degree;
    out.points.reserve(m * m * base.size());
    out.weights.reserve(m * m * base.size());
    auto emit = [&](const Bary& v0, const Bary& v1, const Bary& v2) {
        for (std::size_t p = 0; p < base.size(); ++p) {
            const auto& l = base.points[p];
            Bary x{};
            for (int c = 0; c < 3; ++c)
                x[c] = l[0] * v0[c] + l[1] * v1[c] + l[2] * v2[c];
            out.points.push_back(x);
            out.weights.push_back(base.weights[p] * inv * inv);
        }
    };
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i + j < m; ++i) {
            emit(node(i, j), node(i + 1, j), node(i, j + 1));
            if (i + j + 2 <= m)
                emit(node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
        }
    return out;
}

TriangleQuadrature interior_triangle_rule() {
    return {2,
            {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
             {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
             {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}},
            {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0}};
}

FeFunction::FeFunction(std::shared_ptr<const Mesh> mesh, std::vector<double> coeffs)
    : mesh_(std::move(mesh)), coeffs_(std::move(coeffs)) {
    if (!mesh_)
        throw std::invalid_argument("FeFunction needs a mesh");
    if (coeffs_.size() != mesh_->num_nodes())
        throw std::invalid_argument("FeFunction has " + std::to_string(coeffs_.size()) +
                                    " coefficients for " + std::to_string(mesh_->num_nodes()) +
                                    " nodes");
}

FeFunction FeFunction::constant(std::shared_ptr<const Mesh> mesh, double value) {
    const std::size_t n = mesh->num_nodes();
    return {std::move(mesh), std::vector<double>(n, value)};
}

Vec2 FeFunction::gradient(std::size_t triangle) const {
    const auto& t = mesh_->triangle(triangle);
    const auto g = mesh_->basis_gradients(triangle);
    return coeffs_[t[0]] * g[0] + coeffs_[t[1]] * g[1] + coeffs_[t[2]] * g[2];
}

double FeFunction::value_in(std::size_t triangle, const std::array<double, 3>& lambda) const {
    const auto& t = mesh_->triangle(triangle);
    return lambda[0] * coeffs_[t[0]] + lambda[1] * coeffs_[t[1]] + lambda[2] * coeffs_[t[2]];
}

double FeFunction::triangle_integral(std::size_t triangle) const {
    const auto& t = mesh_->triangle(triangle);
    return mesh_->triangle_area() * (coeffs_[t[0]] + coeffs_[t[1]] + coeffs_[t[2]]) / 3.0;
}

FeFunction interpolate_nodal(std::shared_ptr<const Mesh> mesh, const ScalarFunction& f) {
    std::vector<double> c(mesh->num_nodes());
    for (std::size_t i = 0; i < c.size(); ++i) {
        c[i] = f(mesh->node(i));
        if (!std::isfinite(c[i]))
            throw std::domain_error("interpolated function is not finite at node " +
                                    std::to_string(i));
    }
    return {std::move(mesh), std::move(c)};
}

double mean_value(const FeFunction& u) {
    const Mesh& m = u.mesh();
    double sum = 0.0;
    for (std::size_t k = 0; k < m.num_triangles(); ++k)
        sum += u.triangle_integral(k);
    return sum;  // |Omega| = 1
}

ValueAndGradient evaluate_cross_mesh(const FeFunction& u, const Point& x) {
    const PointLocation loc = u.mesh().locate(x);
    return {u.value_in(loc.triangle, loc.barycentric), u.gradient(loc.triangle)};
}

double l1_ratio_deviation(const FeFunction& s_new, const FeFunction& s_old) {
    if (s_new.mesh().subdivisions() != s_old.mesh().subdivisions())
        throw std::invalid_argument("l1_ratio_deviation needs both fields on the same mesh");

    const Mesh& m = s_old.mesh();
    std::vector<double> r(m.num_nodes());
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (s_old[i] == 0.0)
            throw std::domain_error("zero nodal value at node " + std::to_string(i) +
                                    " in the reference field");
        r[i] = 1.0 - s_new[i] / s_old[i];
    }

    const TriangleQuadrature q = triangle_rule(2);
    const double jac = 2.0 * m.triangle_area();
    double sum = 0.0;
    for (std::size_t k = 0; k < m.num_triangles(); ++k) {
        const auto& t = m.triangle(k);
        for (std::size_t p = 0; p < q.size(); ++p) {
            const auto& l = q.points[p];
            sum += q.weights[p] * std::abs(l[0] * r[t[0]] + l[1] * r[t[1]] + l[2] * r[t[2]]);
        }
    }
    return sum * jac;
}

double h1_seminorm_region(const FeFunction& u, const RegionPredicate& region) {
    const Mesh& m = u.mesh();
    double sum = 0.0;
    for (std::size_t k = 0; k < m.num_triangles(); ++k) {
        if (!region(m.barycenter(k)))
            continue;
        const Vec2 g = u.gradient(k);
        sum += m.triangle_area() * dot(g, g);
    }
    return std::sqrt(sum);
}

double h1_seminorm(const FeFunction& u) {
    return h1_seminorm_region(u, [](const Point&) { return true; });
}

double l2_norm(const FeFunction& u) {
    // exact for P1: |K|/12 * (sum u_i^2 + (sum u_i)^2)
    const Mesh& m = u.mesh();
    double sum = 0.0;
    for (std::size_t k = 0; k < m.num_triangles(); ++k) {
        const auto& t = m.triangle(k);
        const double a = u[t[0]], b = u[t[1]], c = u[t[2]];
        sum += (a * a + b * b + c * c + (a + b + c) * (a + b + c));
    }
    return std::sqrt(sum * m.triangle_area() / 12.0);
}

std::vector<double> element_integrals_on(const FeFunction& u, const Mesh& target,
                                         const TriangleQuadrature& rule) {
    std::vector<double> out(target.num_triangles(), 0.0);
    const double jac = 2.0 * target.triangle_area();
    for (std::size_t k = 0; k < target.num_triangles(); ++k)
        for (std::size_t p = 0; p < rule.size(); ++p)
            out[k] += rule.weights[p] * jac *
                      evaluate_cross_mesh(u, target.from_barycentric(k, rule.points[p])).value;
    return out;
}

std::vector<double> element_integrals_on(const FeFunction& u, const Mesh& target) {
    const Mesh& src = u.mesh();
    std::vector<double> out(target.num_triangles(), 0.0);

    if (target.is_nested_in(src)) {
        for (std::size_t k = 0; k < src.num_triangles(); ++k)
            out[target.locate(src.barycenter(k)).triangle] += u.triangle_integral(k);
        return out;
    }

    // Split each target triangle into m^2 similar pieces, m chosen so the
    // pieces are smaller than the source cells, and integrate each piece
    // with the interior degree-2 rule.
    const std::size_t m =
        2 * ((src.subdivisions() + target.subdivisions() - 1) / target.subdivisions());
    const TriangleQuadrature q = interior_triangle_rule();
    const double piece_jac = 2.0 * target.triangle_area() / static_cast<double>(m * m);
    const double dm = static_cast<double>(m);
    for (std::size_t k = 0; k < target.num_triangles(); ++k) {
        const auto& t = target.triangle(k);
        const Point a = target.node(t[0]);
        const Vec2 e1 = (target.node(t[1]) - a) * (1.0 / dm);
        const Vec2 e2 = (target.node(t[2]) - a) * (1.0 / dm);
        double sum = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; i + j < m; ++j) {
                const Point o = a + static_cast<double>(i) * e1 + static_cast<double>(j) * e2;
                // upright piece (o, o+e1, o+e2)
                for (std::size_t p = 0; p < q.size(); ++p) {
                    const auto& l = q.points[p];
                    sum += q.weights[p] * evaluate_cross_mesh(u, o + l[1] * e1 + l[2] * e2).value;
                }
                // inverted piece (o+e1, o+e1+e2, o+e2)
                if (i + j + 1 < m) {
                    for (std::size_t p = 0; p < q.size(); ++p) {
                        const auto& l = q.points[p];
                        const Point x = o + e1 + l[1] * e2 + l[2] * (e2 - e1);
                        sum += q.weights[p] * evaluate_cross_mesh(u, x).value;
                    }
                }
            }
        }
        out[k] = sum * piece_jac;
    }
    return out;
}

void write_field(std::ostream& out, const FeFunction& u) {
    out << "p1-field n=" << u.mesh().subdivisions() << '\n';
    char buf[64];
    for (double v : u.coeffs()) {
        auto res = std::to_chars(buf, buf + sizeof buf, v);
        out.write(buf, res.ptr - buf);
        out.put('\n');
    }
}

FeFunction read_field(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("p1-field n=", 0) != 0)
        throw std::runtime_error("not a p1-field file: bad header '" + header + "'");
    std::size_t n = 0;
    const char* first = header.data() + 11;
    const char* last = header.data() + header.size();
    auto [ptr, ec] = std::from_chars(first, last, n);
    if (ec != std::errc() || ptr != last || n == 0)
        throw std::runtime_error("p1-field header has an invalid size: '" + header + "'");

    auto mesh = std::make_shared<const Mesh>(n);
    std::vector<double> c(mesh->num_nodes());
    std::string line;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!std::getline(in, line))
            throw std::runtime_error("p1-field truncated after " + std::to_string(i) + " values");
        auto r = std::from_chars(line.data(), line.data() + line.size(), c[i]);
        if (r.ec != std::errc())
            throw std::runtime_error("p1-field has a malformed value on line " +
                                     std::to_string(i + 2));
    }
    return {std::move(mesh), std::move(c)};
}

void save_field(const std::string& path, const FeFunction& u) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    write_field(out, u);
    if (!out)
        throw std::runtime_error("failed writing '" + path + "'");
}

FeFunction load_field(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    return read_field(in);
}

} // namespace imfem
