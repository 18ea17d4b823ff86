#pragma once

#include "imfem/fem.hpp"
#include "imfem/linalg.hpp"
#include "imfem/mesh.hpp"
#include "imfem/velocity.hpp"

#include <memory>
#include <stdexcept>
#include <vector>

namespace imfem {

class InvariantMeasureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct InvariantMeasureOptions {
    double lambda = 1e-3;
    double tol = 1e-3;
    int max_iter = 500;
    int quad_degree = 5;
};

struct InvariantMeasureResult {
    FeFunction sigma;
    int iterations = 0;
    double final_deviation = 0.0;
    double mean = 0.0;
    double kappa = 0.0;  // 0 for sigma1 and sigma2_0, kappa_h for a composed sigma2

    /// True when the integral of sigma over every triangle of target is positive.
    bool elementwise_positive_on(const Mesh& target) const;
};

/// Douglas-Wang parameter h/(2|b|) (coth(Pe) - 1/Pe), Pe = |b| h / 2, with
/// the series h^2/12 (1 - Pe^2/15) below Pe = 1e-4.
double dw_tau_star(double b_norm, double h);
inline double dw_tau_star(const Point& x, const VelocityField& b, double h) {
    return dw_tau_star(norm(b.b(x)), h);
}

struct AdjointSystem {
    SparseMatrix matrix;  // a*(s, phi) + lambda (s, phi) [+ DW stabilization]
    SparseMatrix mass;
};

/// Matrix over the full P1 space (no boundary elimination); row = test
/// function, column = trial function. The DW term uses -Laplace(P1) = 0 on
/// each triangle.
AdjointSystem assemble_adjoint_system(const Mesh& mesh_h, const VelocityField& b, double lambda,
                                      bool dw_stabilization, int quad_degree = 5);

inline AdjointSystem assemble_sigma1_system(const Mesh& mesh_h, const VelocityField& b,
                                            double lambda, int quad_degree = 5) {
    return assemble_adjoint_system(mesh_h, b, lambda, true, quad_degree);
}

/// Nodal load of the flux condition: integral over the boundary of
/// (b.n - mean(b.n)) phi_i.
std::vector<double> sigma2_boundary_load(const Mesh& mesh_h, const VelocityField& b,
                                         int boundary_degree = 5);

/// psi_H in H^1_0: (grad psi_H, grad v) = (b, grad v) for all interior v.
FeFunction potential_part(std::shared_ptr<const Mesh> mesh_H, const VelocityField& b,
                          int quad_degree = 5);

InvariantMeasureResult compute_sigma1(std::shared_ptr<const Mesh> mesh_h,
                                      std::shared_ptr<const Mesh> mesh_H, const VelocityField& b,
                                      const InvariantMeasureOptions& opts = {});

InvariantMeasureResult compute_sigma2_0(std::shared_ptr<const Mesh> mesh_h, const VelocityField& b,
                                        const InvariantMeasureOptions& opts = {});

struct ComposedSigma2 {
    FeFunction sigma2;
    double kappa;
};

/// kappa_h = 1 + max(0, max_i -sigma2_0(x_i)/sigma1(x_i)). Throws
/// InvariantMeasureError when sigma1 has a non-positive nodal value.
ComposedSigma2 compose_sigma2(const FeFunction& sigma2_0, const FeFunction& sigma1);

/// As above when sigma1 is nodally positive. Otherwise kappa_h is chosen so
/// that the integral of sigma2_0 + kappa_h sigma1 is positive on every
/// element of target: 1 + the smallest admissible value when that keeps all
/// integrals positive, the middle of the admissible interval if not. The
/// integrals use the rule of the weighted assembly (degree quad_degree on
/// ceil(h⁻¹/H⁻¹)² sub-triangles) so both agree on the sign. Throws
/// InvariantMeasureError when no such kappa exists.
ComposedSigma2 compose_sigma2(const FeFunction& sigma2_0, const FeFunction& sigma1,
                              const Mesh& target, int quad_degree = 5);

/// grad s1|_K + s1 b + tau*(b.grad s1|_K + s1 div b) b at x in triangle K of s1's mesh.
Vec2 corrected_field_B1bar(const FeFunction& sigma1, const VelocityField& b, std::size_t triangle,
                           const Point& x);

Vec2 corrected_field_B2bar(const FeFunction& sigma2_0, const FeFunction& sigma1, double kappa,
                           const VelocityField& b, std::size_t triangle, const Point& x);

} // namespace imfem
