#include "imfem/advdiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace imfem {

std::string_view method_name(Method m) {
    switch (m) {
    case Method::P1: return "P1";
    case Method::P1GLS: return "P1GLS";
    case Method::Sigma1Exact: return "Sigma1Exact";
    case Method::Sigma1h: return "Sigma1h";
    case Method::Sigma2h: return "Sigma2h";
    case Method::Sigma2hGLS: return "Sigma2hGLS";
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view name) {
    for (Method m : all_methods)
        if (method_name(m) == name)
            return m;
    return std::nullopt;
}

bool uses_fine_mesh(Method m) {
    return m == Method::Sigma1h || m == Method::Sigma2h || m == Method::Sigma2hGLS;
}

WeightField unit_weight(const VelocityField& b) {
    return [bf = b.b](const Point& x) {
        const Vec2 v = bf(x);
        return WeightSample{1.0, v, v};
    };
}

WeightField exact_sigma1_weight(const VelocityField& b) {
    if (!b.irrotational())
        throw std::invalid_argument("the exact invariant measure is only known for gradient fields");

    // mean of exp(-(phi - shift)) by tensor Gauss-Legendre on a 128^2 grid of cells
    const auto phi = b.potential;
    constexpr int cells = 128;
    constexpr std::array<double, 4> gx = {-0.8611363115940526, -0.3399810435848563,
                                          0.3399810435848563, 0.8611363115940526};
    constexpr std::array<double, 4> gw = {0.3478548451374538, 0.6521451548625461,
                                          0.6521451548625461, 0.3478548451374538};
    double shift = std::numeric_limits<double>::infinity();
    for (int j = 0; j <= cells; ++j)
        for (int i = 0; i <= cells; ++i)
            shift = std::min(shift, phi({double(i) / cells, double(j) / cells}));
    double integral = 0.0;
    const double hc = 1.0 / cells;
    for (int j = 0; j < cells; ++j)
        for (int i = 0; i < cells; ++i)
            for (int a = 0; a < 4; ++a)
                for (int c = 0; c < 4; ++c) {
                    const Point x{(i + 0.5 * (1.0 + gx[a])) * hc, (j + 0.5 * (1.0 + gx[c])) * hc};
                    integral += 0.25 * hc * hc * gw[a] * gw[c] * std::exp(-(phi(x) - shift));
                }

    return [phi, shift, integral](const Point& x) {
        return WeightSample{std::exp(-(phi(x) - shift)) / integral, {}, {}};
    };
}

WeightField sigma1h_weight(FeFunction sigma1, VelocityField b) {
    return [s1 = std::move(sigma1), b = std::move(b)](const Point& x) {
        const PointLocation loc = s1.mesh().locate(x);
        const double s = s1.value_in(loc.triangle, loc.barycentric);
        return WeightSample{s, corrected_field_B1bar(s1, b, loc.triangle, x),
                            s1.gradient(loc.triangle) + s * b.b(x)};
    };
}

WeightField sigma2h_weight(FeFunction sigma2_0, FeFunction sigma1, double kappa, VelocityField b) {
    if (sigma2_0.mesh().subdivisions() != sigma1.mesh().subdivisions())
        throw std::invalid_argument("sigma2_0 and sigma1 must share a mesh");
    // Combine at the nodes first. With a large kappa the sum cancels, and
    // interpolating positive nodal sums keeps every point value positive.
    std::vector<double> c(sigma1.coeffs().size());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = sigma2_0[i] + kappa * sigma1[i];
    FeFunction s2(sigma1.mesh_ptr(), std::move(c));
    return [s20 = std::move(sigma2_0), s1 = std::move(sigma1), s2 = std::move(s2), kappa,
            b = std::move(b)](const Point& x) {
        const PointLocation loc = s1.mesh().locate(x);
        const double s = s2.value_in(loc.triangle, loc.barycentric);
        return WeightSample{s, corrected_field_B2bar(s20, s1, kappa, b, loc.triangle, x),
                            s2.gradient(loc.triangle) + s * b.b(x)};
    };
}

namespace {

struct ElementLoop {
    const Mesh& mesh;
    const DofMap& dofs;
    TripletBuffer triplets;
    std::vector<double> rhs;

    ElementLoop(const Mesh& m, const DofMap& d) : mesh(m), dofs(d), rhs(d.size(), 0.0) {
        triplets.reserve(9 * m.num_triangles());
    }

    void scatter(std::size_t k, const double (&local)[3][3], const double (&load)[3]) {
        const auto& tri = mesh.triangle(k);
        for (int i = 0; i < 3; ++i) {
            const std::size_t r = dofs.node_to_dof[tri[i]];
            if (r == DofMap::none)
                continue;
            rhs[r] += load[i];
            for (int j = 0; j < 3; ++j) {
                const std::size_t c = dofs.node_to_dof[tri[j]];
                if (c != DofMap::none)
                    triplets.add(r, c, local[i][j]);
            }
        }
    }
};

// The diffusion block on K is |grad u|^2 times the quadrature integral of
// sigma over K, so that integral is what coercivity needs.
void require_positive(double element_integral, const Mesh& mesh, std::size_t k) {
    if (!(element_integral > 0.0)) {
        const Point c = mesh.barycenter(k);
        throw PositivityError("invariant measure has a non-positive integral on the element at (" +
                              std::to_string(c.x) + ", " + std::to_string(c.y) + ")");
    }
}

} // namespace

WeightMoments weight_moments(const Mesh& mesh_H, const WeightField& weight, int quad_degree,
                             std::size_t subdivisions) {
    const TriangleQuadrature q = composite_rule(triangle_rule(quad_degree), subdivisions);
    const double jac = 2.0 * mesh_H.triangle_area();
    WeightMoments out;
    out.elements.resize(mesh_H.num_triangles());
    for (std::size_t k = 0; k < mesh_H.num_triangles(); ++k) {
        ElementMoments& e = out.elements[k];
        for (std::size_t p = 0; p < q.size(); ++p) {
            const auto& l = q.points[p];
            const double w = q.weights[p] * jac;
            const WeightSample s = weight(mesh_H.from_barycentric(k, l));
            e.sigma += w * s.sigma;
            for (int i = 0; i < 3; ++i) {
                e.b_bar[i] += (w * l[i]) * s.b_bar;
                for (int j = 0; j < 3; ++j)
                    e.phi_phi[i][j] += w * s.sigma * l[i] * l[j];
            }
        }
    }
    return out;
}

LinearSystem assemble_ss(const Mesh& mesh_H, const WeightMoments& moments, const ScalarFunction& f) {
    if (moments.elements.size() != mesh_H.num_triangles())
        throw std::invalid_argument("weight moments belong to a different mesh");
    DofMap dofs = interior_dofs(mesh_H);
    ElementLoop loop(mesh_H, dofs);
    for (std::size_t k = 0; k < mesh_H.num_triangles(); ++k) {
        const ElementMoments& e = moments.elements[k];
        require_positive(e.sigma, mesh_H, k);
        const auto g = mesh_H.basis_gradients(k);
        const auto& tri = mesh_H.triangle(k);
        const double fn[3] = {f(mesh_H.node(tri[0])), f(mesh_H.node(tri[1])), f(mesh_H.node(tri[2]))};
        double local[3][3] = {};
        double load[3] = {};
        for (int i = 0; i < 3; ++i) {      // test
            for (int j = 0; j < 3; ++j) {  // trial
                local[i][j] = e.sigma * dot(g[j], g[i]) +
                              0.5 * (dot(e.b_bar[i], g[j]) - dot(e.b_bar[j], g[i]));
                load[i] += e.phi_phi[i][j] * fn[j];
            }
        }
        loop.scatter(k, local, load);
    }
    return {SparseMatrix(dofs.size(), loop.triplets), std::move(loop.rhs), std::move(dofs)};
}

LinearSystem assemble_ss(const Mesh& mesh_H, const WeightField& weight, const ScalarFunction& f,
                         int quad_degree, std::size_t subdivisions) {
    return assemble_ss(mesh_H, weight_moments(mesh_H, weight, quad_degree, subdivisions), f);
}

SparseMatrix assemble_weighted_stiffness(const Mesh& mesh_H, const WeightField& weight,
                                         int quad_degree, std::size_t subdivisions) {
    const TriangleQuadrature q = composite_rule(triangle_rule(quad_degree), subdivisions);
    const double jac = 2.0 * mesh_H.triangle_area();
    const DofMap dofs = interior_dofs(mesh_H);
    ElementLoop loop(mesh_H, dofs);
    for (std::size_t k = 0; k < mesh_H.num_triangles(); ++k) {
        const auto g = mesh_H.basis_gradients(k);
        double swt = 0.0;
        for (std::size_t p = 0; p < q.size(); ++p)
            swt += q.weights[p] * jac * weight(mesh_H.from_barycentric(k, q.points[p])).sigma;
        double local[3][3] = {};
        const double load[3] = {};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                local[i][j] = swt * dot(g[j], g[i]);
        loop.scatter(k, local, load);
    }
    return {dofs.size(), loop.triplets};
}

LinearSystem assemble_plain_p1(const Mesh& mesh_H, const VelocityField& b, const ScalarFunction& f,
                               int quad_degree) {
    const TriangleQuadrature q = triangle_rule(quad_degree);
    const double jac = 2.0 * mesh_H.triangle_area();
    DofMap dofs = interior_dofs(mesh_H);
    ElementLoop loop(mesh_H, dofs);
    for (std::size_t k = 0; k < mesh_H.num_triangles(); ++k) {
        const auto g = mesh_H.basis_gradients(k);
        double local[3][3] = {};
        double load[3] = {};
        for (std::size_t p = 0; p < q.size(); ++p) {
            const auto& l = q.points[p];
            const double w = q.weights[p] * jac;
            const Point x = mesh_H.from_barycentric(k, l);
            const Vec2 bx = b.b(x);
            const double fx = f(x);
            for (int i = 0; i < 3; ++i) {
                load[i] += w * fx * l[i];
                for (int j = 0; j < 3; ++j)
                    local[i][j] += w * (dot(g[j], g[i]) + dot(bx, g[j]) * l[i]);
            }
        }
        loop.scatter(k, local, load);
    }
    return {SparseMatrix(dofs.size(), loop.triplets), std::move(loop.rhs), std::move(dofs)};
}

double gls_tau(double sigma, const Vec2& field, double H) {
    const double bn = norm(field);
    if (!(sigma > 0.0))  // limit of vanishing diffusion
        return bn > 0.0 ? H / (2.0 * bn) : 0.0;
    const double pe = bn * H / (2.0 * sigma);
    if (pe < 1e-4)
        return H * H / (12.0 * sigma) * (1.0 - pe * pe / 15.0);
    return H / (2.0 * bn) * (1.0 / std::tanh(pe) - 1.0 / pe);
}

GlsIncrement assemble_gls_terms(const Mesh& mesh_H, const DofMap& dofs, const WeightField& weight,
                                const VelocityField& b, const ScalarFunction& f, GlsField field,
                                int quad_degree, std::size_t subdivisions) {
    const TriangleQuadrature q = composite_rule(triangle_rule(quad_degree), subdivisions);
    const double jac = 2.0 * mesh_H.triangle_area();
    const double H = mesh_H.diameter();
    ElementLoop loop(mesh_H, dofs);
    for (std::size_t k = 0; k < mesh_H.num_triangles(); ++k) {
        const auto g = mesh_H.basis_gradients(k);
        double local[3][3] = {};
        double load[3] = {};
        for (std::size_t p = 0; p < q.size(); ++p) {
            const double w = q.weights[p] * jac;
            const Point x = mesh_H.from_barycentric(k, q.points[p]);
            const WeightSample s = weight(x);
            const double tau = gls_tau(s.sigma, field == GlsField::B2 ? s.b_plain : s.b_bar, H);
            const Vec2 sb = s.sigma * b.b(x);
            const double sbg[3] = {dot(sb, g[0]), dot(sb, g[1]), dot(sb, g[2])};
            const double sf = s.sigma * f(x);
            for (int i = 0; i < 3; ++i) {
                load[i] += w * tau * sf * sbg[i];
                for (int j = 0; j < 3; ++j)
                    local[i][j] += w * tau * sbg[j] * sbg[i];
            }
        }
        loop.scatter(k, local, load);
    }
    return {SparseMatrix(dofs.size(), loop.triplets), std::move(loop.rhs)};
}

namespace {

void add_increment(LinearSystem& sys, const GlsIncrement& inc) {
    sys.matrix = sys.matrix.combine(1.0, inc.matrix, 1.0);
    for (std::size_t i = 0; i < sys.rhs.size(); ++i)
        sys.rhs[i] += inc.rhs[i];
}

const FeFunction& require(const std::optional<FeFunction>& f, const char* what) {
    if (!f)
        throw std::invalid_argument(std::string("method needs ") + what);
    return *f;
}

} // namespace

std::size_t default_subdivisions(const Mesh& mesh_H, const Mesh& mesh_h) {
    const std::size_t nH = mesh_H.subdivisions(), nh = mesh_h.subdivisions();
    return std::max<std::size_t>(1, (nh + nH - 1) / nH);
}

WeightField method_weight(Method m, const VelocityField& b, const SigmaInputs& sigma) {
    switch (m) {
    case Method::Sigma1Exact:
        return exact_sigma1_weight(b);
    case Method::Sigma1h:
        return sigma1h_weight(require(sigma.sigma1, "sigma1"), b);
    case Method::Sigma2h:
    case Method::Sigma2hGLS:
        return sigma2h_weight(require(sigma.sigma2_0, "sigma2_0"), require(sigma.sigma1, "sigma1"),
                              sigma.kappa, b);
    default:
        return unit_weight(b);
    }
}

std::size_t method_subdivisions(const Mesh& mesh_H, const MethodConfig& config,
                                const SigmaInputs& sigma) {
    if (config.subdivisions > 0)
        return config.subdivisions;
    return sigma.sigma1 ? default_subdivisions(mesh_H, sigma.sigma1->mesh()) : 1;
}

LinearSystem assemble_method(const Mesh& mesh_H, const MethodConfig& config,
                             const VelocityField& b, const SigmaInputs& sigma) {
    const int qd = config.quad_degree;
    switch (config.method) {
    case Method::P1:
        return assemble_plain_p1(mesh_H, b, config.f, qd);
    case Method::P1GLS: {
        LinearSystem sys = assemble_plain_p1(mesh_H, b, config.f, qd);
        add_increment(sys, assemble_gls_terms(mesh_H, sys.dofs, unit_weight(b), b, config.f,
                                              GlsField::B2, qd));
        return sys;
    }
    case Method::Sigma1Exact:
    case Method::Sigma1h:
    case Method::Sigma2h:
    case Method::Sigma2hGLS: {
        const std::size_t m = method_subdivisions(mesh_H, config, sigma);
        const WeightField w = method_weight(config.method, b, sigma);
        LinearSystem sys = sigma.moments ? assemble_ss(mesh_H, *sigma.moments, config.f)
                                         : assemble_ss(mesh_H, w, config.f, qd, m);
        if (config.method == Method::Sigma2hGLS)
            add_increment(sys, assemble_gls_terms(mesh_H, sys.dofs, w, b, config.f,
                                                  config.gls_field, qd, m));
        return sys;
    }
    }
    throw std::invalid_argument("unknown method");
}

FeFunction solve_u(std::shared_ptr<const Mesh> mesh_H, const MethodConfig& config,
                   const VelocityField& b, const SigmaInputs& sigma) {
    const LinearSystem sys = assemble_method(*mesh_H, config, b, sigma);
    if (sys.dofs.size() == 0)
        return FeFunction::constant(std::move(mesh_H), 0.0);
    const auto u = solve_direct(sys.matrix, sys.rhs);
    return extend_by_zero(std::move(mesh_H), sys.dofs, u);
}

} // namespace imfem
