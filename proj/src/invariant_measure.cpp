#include "imfem/invariant_measure.hpp"

#include "imfem/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace imfem {

bool InvariantMeasureResult::elementwise_positive_on(const Mesh& target) const {
    const auto integrals = element_integrals_on(sigma, target);
    return std::all_of(integrals.begin(), integrals.end(), [](double v) { return v > 0.0; });
}

double dw_tau_star(double b_norm, double h) {
    const double pe = 0.5 * b_norm * h;
    if (pe < 1e-4)
        return h * h / 12.0 * (1.0 - pe * pe / 15.0);
    return h / (2.0 * b_norm) * (1.0 / std::tanh(pe) - 1.0 / pe);
}

AdjointSystem assemble_adjoint_system(const Mesh& mesh_h, const VelocityField& b, double lambda,
                                      bool dw_stabilization, int quad_degree) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("the relaxation parameter lambda must be positive");

    const TriangleQuadrature q = triangle_rule(quad_degree);
    const double jac = 2.0 * mesh_h.triangle_area();
    const double h = mesh_h.diameter();

    TripletBuffer t;
    t.reserve(9 * mesh_h.num_triangles());
    for (std::size_t k = 0; k < mesh_h.num_triangles(); ++k) {
        const auto& tri = mesh_h.triangle(k);
        const auto g = mesh_h.basis_gradients(k);
        double local[3][3] = {};
        for (std::size_t p = 0; p < q.size(); ++p) {
            const auto& l = q.points[p];
            const double w = q.weights[p] * jac;
            const Point x = mesh_h.from_barycentric(k, l);
            const Vec2 bx = b.b(x);
            const double bg[3] = {dot(bx, g[0]), dot(bx, g[1]), dot(bx, g[2])};
            double tau = 0.0, divb = 0.0;
            if (dw_stabilization) {
                tau = dw_tau_star(norm(bx), h);
                divb = b.div_b(x);
            }
            for (int i = 0; i < 3; ++i) {      // test
                for (int j = 0; j < 3; ++j) {  // trial
                    double v = dot(g[j], g[i]) + l[j] * bg[i] + lambda * l[j] * l[i];
                    if (dw_stabilization)
                        v += tau * (bg[j] + l[j] * divb) * bg[i];
                    local[i][j] += w * v;
                }
            }
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                t.add(tri[i], tri[j], local[i][j]);
    }
    const DofMap dofs = all_dofs(mesh_h);
    return {SparseMatrix(mesh_h.num_nodes(), t), assemble_mass(mesh_h, dofs)};
}

std::vector<double> sigma2_boundary_load(const Mesh& mesh_h, const VelocityField& b,
                                         int boundary_degree) {
    const auto pts = mesh_h.boundary_quadrature(boundary_degree);
    double flux = 0.0, perimeter = 0.0;
    for (const auto& p : pts) {
        flux += p.weight * dot(b.b(p.point), p.normal);
        perimeter += p.weight;
    }
    const double mean_flux = flux / perimeter;

    std::vector<double> load(mesh_h.num_nodes(), 0.0);
    const std::size_t per_edge = pts.size() / mesh_h.boundary_edges().size();
    for (std::size_t e = 0; e < mesh_h.boundary_edges().size(); ++e) {
        const auto& edge = mesh_h.boundary_edges()[e];
        const Point& a = mesh_h.node(edge.nodes[0]);
        for (std::size_t k = 0; k < per_edge; ++k) {
            const auto& p = pts[e * per_edge + k];
            const double t = norm(p.point - a) / edge.length;
            const double g = p.weight * (dot(b.b(p.point), p.normal) - mean_flux);
            load[edge.nodes[0]] += (1.0 - t) * g;
            load[edge.nodes[1]] += t * g;
        }
    }
    return load;
}

FeFunction potential_part(std::shared_ptr<const Mesh> mesh_H, const VelocityField& b,
                          int quad_degree) {
    const Mesh& m = *mesh_H;
    const DofMap dofs = interior_dofs(m);
    const TriangleQuadrature q = triangle_rule(quad_degree);
    const double jac = 2.0 * m.triangle_area();

    std::vector<double> rhs(dofs.size(), 0.0);
    for (std::size_t k = 0; k < m.num_triangles(); ++k) {
        const auto& tri = m.triangle(k);
        const auto g = m.basis_gradients(k);
        Vec2 bint{};
        for (std::size_t p = 0; p < q.size(); ++p)
            bint += (q.weights[p] * jac) * b.b(m.from_barycentric(k, q.points[p]));
        for (int i = 0; i < 3; ++i) {
            const std::size_t r = dofs.node_to_dof[tri[i]];
            if (r != DofMap::none)
                rhs[r] += dot(bint, g[i]);
        }
    }
    if (dofs.size() == 0)
        return FeFunction::constant(std::move(mesh_H), 0.0);
    const auto psi = solve_direct(assemble_stiffness(m, dofs), rhs);
    return extend_by_zero(std::move(mesh_H), dofs, psi);
}

namespace {

std::vector<double> scaled(std::vector<double> v, double s) {
    for (double& x : v)
        x *= s;
    return v;
}

InvariantMeasureResult relax_to_invariant_measure(const AdjointSystem& system, FeFunction start,
                                                  const std::vector<double>& load,
                                                  const InvariantMeasureOptions& opts) {
    const DirectSolver lu(system.matrix, RowScaling::None);
    FeFunction sigma = std::move(start);
    const double target = mean_value(sigma);
    for (int it = 1; it <= opts.max_iter; ++it) {
        std::vector<double> rhs = scaled(system.mass.multiply(sigma.coeffs()), opts.lambda);
        for (std::size_t i = 0; i < load.size(); ++i)
            rhs[i] += load[i];
        FeFunction next(sigma.mesh_ptr(), lu.solve(rhs));

        for (std::size_t i = 0; i < sigma.coeffs().size(); ++i) {
            if (sigma[i] == 0.0)
                throw InvariantMeasureError(
                    "iterate vanishes at node " + std::to_string(i) + " (iteration " +
                    std::to_string(it) + "); the ratio stopping test is undefined there");
        }

        const double dev = l1_ratio_deviation(next, sigma);
        sigma = std::move(next);
        if (dev < opts.tol) {
            // Each step preserves the mean exactly but the solve leaves ~eps n^2/lambda
            // of drift, which piles up over the iteration.
            sigma = FeFunction(sigma.mesh_ptr(), scaled({sigma.coeffs().begin(), sigma.coeffs().end()},
                                                        target / mean_value(sigma)));
            const double mean = mean_value(sigma);
            return {std::move(sigma), it, dev, mean, 0.0};
        }
    }
    throw InvariantMeasureError("invariant measure iteration did not reach tolerance " +
                                std::to_string(opts.tol) + " in " +
                                std::to_string(opts.max_iter) + " iterations");
}

} // namespace

InvariantMeasureResult compute_sigma1(std::shared_ptr<const Mesh> mesh_h,
                                      std::shared_ptr<const Mesh> mesh_H, const VelocityField& b,
                                      const InvariantMeasureOptions& opts) {
    const FeFunction psi = potential_part(std::move(mesh_H), b, opts.quad_degree);
    FeFunction start = interpolate_nodal(mesh_h, [&](const Point& x) {
        return std::exp(-evaluate_cross_mesh(psi, x).value);
    });
    const double m0 = mean_value(start);
    start = FeFunction(mesh_h, scaled({start.coeffs().begin(), start.coeffs().end()}, 1.0 / m0));

    const AdjointSystem system = assemble_adjoint_system(*mesh_h, b, opts.lambda, true, opts.quad_degree);
    return relax_to_invariant_measure(system, std::move(start), {}, opts);
}

InvariantMeasureResult compute_sigma2_0(std::shared_ptr<const Mesh> mesh_h, const VelocityField& b,
                                        const InvariantMeasureOptions& opts) {
    const AdjointSystem system =
        assemble_adjoint_system(*mesh_h, b, opts.lambda, false, opts.quad_degree);
    const auto load = sigma2_boundary_load(*mesh_h, b);
    return relax_to_invariant_measure(system, FeFunction::constant(mesh_h, 1.0), load, opts);
}

ComposedSigma2 compose_sigma2(const FeFunction& sigma2_0, const FeFunction& sigma1) {
    if (sigma2_0.mesh().subdivisions() != sigma1.mesh().subdivisions())
        throw std::invalid_argument("sigma2_0 and sigma1 must live on the same mesh");
    double kbar = 0.0;
    for (std::size_t i = 0; i < sigma1.coeffs().size(); ++i) {
        if (!(sigma1[i] > 0.0))
            throw InvariantMeasureError("sigma1 is not positive at node " + std::to_string(i) +
                                        "; cannot lift sigma2_0");
        kbar = std::max(kbar, -sigma2_0[i] / sigma1[i]);
    }
    const double kappa = 1.0 + kbar;
    std::vector<double> c(sigma1.coeffs().size());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = sigma2_0[i] + kappa * sigma1[i];
    return {FeFunction(sigma1.mesh_ptr(), std::move(c)), kappa};
}

ComposedSigma2 compose_sigma2(const FeFunction& sigma2_0, const FeFunction& sigma1,
                              const Mesh& target, int quad_degree) {
    const auto& s1 = sigma1.coeffs();
    if (std::all_of(s1.begin(), s1.end(), [](double v) { return v > 0.0; }))
        return compose_sigma2(sigma2_0, sigma1);
    if (sigma2_0.mesh().subdivisions() != sigma1.mesh().subdivisions())
        throw std::invalid_argument("sigma2_0 and sigma1 must live on the same mesh");

    const std::size_t nH = target.subdivisions(), nh = sigma1.mesh().subdivisions();
    const TriangleQuadrature rule =
        composite_rule(triangle_rule(quad_degree), std::max<std::size_t>(1, (nh + nH - 1) / nH));
    const auto i2 = element_integrals_on(sigma2_0, target, rule);
    const auto i1 = element_integrals_on(sigma1, target, rule);
    // admissible kappa: lo < kappa < hi
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < i1.size(); ++k) {
        if (i1[k] > 0.0)
            lo = std::max(lo, -i2[k] / i1[k]);
        else if (i1[k] < 0.0)
            hi = std::min(hi, i2[k] / -i1[k]);
        else if (!(i2[k] > 0.0))
            hi = -1.0;
    }
    if (!(lo < hi))
        throw InvariantMeasureError("no kappa makes sigma2_0 + kappa sigma1 positive on every "
                                    "element of the coarse mesh");
    // With kappa ~1e14 and beyond a margin of 1 over lo is below the round-off of
    // the nodal sums, so check the formed field and widen the margin until it passes.
    const auto formed = [&](double kappa) {
        std::vector<double> c(s1.size());
        for (std::size_t i = 0; i < c.size(); ++i)
            c[i] = sigma2_0[i] + kappa * sigma1[i];
        return FeFunction(sigma1.mesh_ptr(), std::move(c));
    };
    for (double margin = 1.0; lo + margin < hi && std::isfinite(margin); margin *= 10.0) {
        FeFunction c = formed(lo + margin);
        const auto ic = element_integrals_on(c, target, rule);
        if (std::all_of(ic.begin(), ic.end(), [](double v) { return v > 0.0; }))
            return {std::move(c), lo + margin};
    }
    if (!std::isfinite(hi))
        throw InvariantMeasureError("no finite kappa makes sigma2_0 + kappa sigma1 positive on "
                                    "every element of the coarse mesh");
    const double kappa = 0.5 * (lo + hi);
    return {formed(kappa), kappa};
}

Vec2 corrected_field_B1bar(const FeFunction& sigma1, const VelocityField& b, std::size_t triangle,
                           const Point& x) {
    const Mesh& m = sigma1.mesh();
    const auto lambda = m.barycentric_in(triangle, x);
    const double s = sigma1.value_in(triangle, lambda);
    const Vec2 gs = sigma1.gradient(triangle);
    const Vec2 bx = b.b(x);
    const double tau = dw_tau_star(norm(bx), m.diameter());
    return gs + s * bx + (tau * (dot(bx, gs) + s * b.div_b(x))) * bx;
}

Vec2 corrected_field_B2bar(const FeFunction& sigma2_0, const FeFunction& sigma1, double kappa,
                           const VelocityField& b, std::size_t triangle, const Point& x) {
    const double s = sigma2_0.value_in(triangle, sigma2_0.mesh().barycentric_in(triangle, x));
    return sigma2_0.gradient(triangle) + s * b.b(x) +
           kappa * corrected_field_B1bar(sigma1, b, triangle, x);
}

} // namespace imfem
