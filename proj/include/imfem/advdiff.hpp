#pragma once

#include "imfem/assembly.hpp"
#include "imfem/fem.hpp"
#include "imfem/invariant_measure.hpp"
#include "imfem/linalg.hpp"
#include "imfem/mesh.hpp"
#include "imfem/velocity.hpp"

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace imfem {

/// The six discretizations of -Δu + b·∇u = f, u = 0 on the boundary.
enum class Method { P1, P1GLS, Sigma1Exact, Sigma1h, Sigma2h, Sigma2hGLS };

inline constexpr Method all_methods[] = {Method::P1,      Method::P1GLS,   Method::Sigma1Exact,
                                         Method::Sigma1h, Method::Sigma2h, Method::Sigma2hGLS};

std::string_view method_name(Method m);
std::optional<Method> parse_method(std::string_view name);
/// Whether the method uses a discrete invariant measure on a fine mesh.
bool uses_fine_mesh(Method m);

/// Advection field entering the GLS parameter of the sigma2 method.
enum class GlsField { B2, B2bar };

class PositivityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Weight data at a point: sigma, the corrected field used in the skew
/// advection term, and the uncorrected grad(sigma) + sigma b.
struct WeightSample {
    double sigma;
    Vec2 b_bar;
    Vec2 b_plain;
};
using WeightField = std::function<WeightSample(const Point&)>;

WeightField unit_weight(const VelocityField& b);
/// e^{-phi}/mean(e^{-phi}) for b = grad(phi); grad(sigma) + sigma b vanishes identically.
WeightField exact_sigma1_weight(const VelocityField& b);
WeightField sigma1h_weight(FeFunction sigma1, VelocityField b);
WeightField sigma2h_weight(FeFunction sigma2_0, FeFunction sigma1, double kappa, VelocityField b);

struct LinearSystem {
    SparseMatrix matrix;
    std::vector<double> rhs;
    DofMap dofs;
};

/// Integrals of the weight against the P1 basis of one coarse element.
struct ElementMoments {
    double sigma = 0.0;            // ∫_K σ
    std::array<Vec2, 3> b_bar{};   // ∫_K B̄ φ_i
    double phi_phi[3][3] = {};     // ∫_K σ φ_i φ_j
};

/// Per-element moments of the weight on T_H, the rule of the given degree
/// applied on subdivisions² sub-triangles of each K. Everything the
/// weighted forms need from σ, so they can be prepared once per measure.
struct WeightMoments {
    std::vector<ElementMoments> elements;
};

WeightMoments weight_moments(const Mesh& mesh_H, const WeightField& weight, int quad_degree = 5,
                             std::size_t subdivisions = 1);

/// Interior-dof system of  ∫σ∇u·∇v + B̄·(v∇u − u∇v)/2 = ∫σ f v, with f
/// replaced by its nodal interpolant on T_H in the load.
/// Throws PositivityError if ∫_K σ ≤ 0 for some K.
LinearSystem assemble_ss(const Mesh& mesh_H, const WeightMoments& moments, const ScalarFunction& f);

/// Same, computing the moments on the fly.
LinearSystem assemble_ss(const Mesh& mesh_H, const WeightField& weight, const ScalarFunction& f,
                         int quad_degree = 5, std::size_t subdivisions = 1);

/// The ∫σ∇u·∇v block alone.
SparseMatrix assemble_weighted_stiffness(const Mesh& mesh_H, const WeightField& weight,
                                         int quad_degree = 5, std::size_t subdivisions = 1);

/// Plain Galerkin ∫∇u·∇v + (b·∇u) v = ∫ f v on interior dofs.
LinearSystem assemble_plain_p1(const Mesh& mesh_H, const VelocityField& b, const ScalarFunction& f,
                               int quad_degree = 5);

/// GLS parameter with Pe = |B| H / (2σ); σ ≤ 0 is taken as the Pe → ∞ limit.
double gls_tau(double sigma, const Vec2& field, double H);

struct GlsIncrement {
    SparseMatrix matrix;
    std::vector<double> rhs;
};

/// Σ_K ∫ τ (σ b·∇u)(σ b·∇v) and Σ_K ∫ τ (σ f)(σ b·∇v), τ from the chosen field.
GlsIncrement assemble_gls_terms(const Mesh& mesh_H, const DofMap& dofs, const WeightField& weight,
                                const VelocityField& b, const ScalarFunction& f, GlsField field,
                                int quad_degree = 5, std::size_t subdivisions = 1);

struct MethodConfig {
    Method method = Method::P1;
    int quad_degree = 5;
    ScalarFunction f = [](const Point&) { return 1.0; };
    GlsField gls_field = GlsField::B2;
    /// Sub-triangles per side for the weighted forms; 0 picks it from the
    /// fine mesh (its number of cells per coarse cell, rounded up).
    std::size_t subdivisions = 0;
};

/// ceil(n_h / n_H), at least 1.
std::size_t default_subdivisions(const Mesh& mesh_H, const Mesh& mesh_h);

/// Discrete invariant measures on the fine mesh, as needed by the method.
struct SigmaInputs {
    std::optional<FeFunction> sigma1;
    std::optional<FeFunction> sigma2_0;
    double kappa = 0.0;
    /// Moments of the method's weight on T_H; computed on demand when absent.
    std::shared_ptr<const WeightMoments> moments;
};

/// The weight of a sigma method (Sigma1Exact, Sigma1h, Sigma2h, Sigma2hGLS).
WeightField method_weight(Method m, const VelocityField& b, const SigmaInputs& sigma);

/// Sub-triangles per side used by the configured method on T_H.
std::size_t method_subdivisions(const Mesh& mesh_H, const MethodConfig& config,
                                const SigmaInputs& sigma);

/// Assembled system for the configured method.
LinearSystem assemble_method(const Mesh& mesh_H, const MethodConfig& config,
                             const VelocityField& b, const SigmaInputs& sigma = {});

/// Assembles and solves with the direct solver. Returns u_H with zero boundary values.
FeFunction solve_u(std::shared_ptr<const Mesh> mesh_H, const MethodConfig& config,
                   const VelocityField& b, const SigmaInputs& sigma = {});

} // namespace imfem
