#pragma once

#include "imfem/advdiff.hpp"
#include "imfem/fem.hpp"
#include "imfem/invariant_measure.hpp"
#include "imfem/mesh.hpp"
#include "imfem/velocity.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace imfem {

/// Ids "i" through "vii".
const std::vector<std::string>& catalog_ids();
VelocityField velocity_catalog(std::string_view test_id);

/// δ = (2/‖b‖) log(‖b‖/2); requires ‖b‖ > 2.
double layer_width(double b_inf_norm);
/// True inside the top, right and bottom strips of width δ.
RegionPredicate layer_region(const VelocityField& b);

/// ‖∇(u_H − u_ref)‖ over the elements of u_H's mesh whose barycenter lies
/// outside the layer (integrated on the reference triangles they contain),
/// divided by ‖∇u_ref‖ over the whole square.
double relative_error(const FeFunction& u_H, const FeFunction& u_ref, const RegionPredicate& layer);

/// Plain P1 Galerkin solution with f = 1 on the uniform mesh with n_ref
/// cells per side. When cache_dir is non-empty the field is stored there
/// and reused.
FeFunction reference_solution(const VelocityField& b, std::size_t n_ref,
                              const std::filesystem::path& cache_dir = {},
                              const ScalarFunction& f = {});

/// Smallest eigenvalue of the symmetric part of the plain P1 operator on
/// interior dofs relative to the mass matrix.
double coercivity_diagnostic(const Mesh& mesh_H, const VelocityField& b, int quad_degree = 5);

/// Fine-mesh sizes (inverse) of the four columns of the published table for a test.
std::vector<std::size_t> published_h_columns(std::string_view test_id);

struct CachedMeasure {
    InvariantMeasureResult result;
    double seconds = 0.0;  // wall time of the computation, 0 when loaded
};

/// What a sigma method needs on T_H once its measures exist.
struct PreparedWeight {
    bool admissible = true;
    std::optional<double> kappa;
    std::string note;
    std::shared_ptr<const WeightMoments> moments;  // null when not admissible
};

/// Memoizes sigma1 and sigma2_0 per (test, kind, h, H, lambda, tol). Each
/// key is computed at most once; results are also written to disk when a
/// directory is configured.
class SigmaCache {
public:
    explicit SigmaCache(std::filesystem::path dir = {}) : dir_(std::move(dir)) {}

    std::shared_ptr<const CachedMeasure> sigma1(const VelocityField& b, std::size_t h_inv,
                                                std::size_t H_inv,
                                                const InvariantMeasureOptions& opts);
    std::shared_ptr<const CachedMeasure> sigma2_0(const VelocityField& b, std::size_t h_inv,
                                                  const InvariantMeasureOptions& opts);

    /// In-memory memo of the quantities derived from cached measures.
    std::shared_ptr<const PreparedWeight> prepared(const std::string& key,
                                                   const std::function<PreparedWeight()>& compute);

    const std::filesystem::path& directory() const { return dir_; }

private:
    template <typename Compute>
    std::shared_ptr<const CachedMeasure> lookup(const std::string& key, Compute&& compute);

    std::filesystem::path dir_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const CachedMeasure>> entries_;
    std::map<std::string, std::shared_ptr<const PreparedWeight>> prepared_;
};

struct RunReport {
    std::string test_id;
    Method method = Method::P1;
    std::size_t H_inv = 0;
    std::optional<std::size_t> h_inv;  // empty for methods without a fine mesh
    std::optional<double> err;         // empty when not admissible
    int iterations = 0;
    double offline_seconds = 0.0;
    double online_seconds = 0.0;
    bool admissible = true;
    std::optional<double> kappa;
    std::string note;
};

struct TableConfig {
    std::vector<std::string> tests;
    std::vector<Method> methods;
    std::size_t H_inv = 16;
    std::vector<std::size_t> h_list;  // empty: the published columns of each test
    std::size_t n_ref = 512;
    InvariantMeasureOptions sigma_opts;
    int quad_degree = 5;
    GlsField gls_field = GlsField::B2;
    std::filesystem::path reference_cache_dir;
};

std::vector<RunReport> run_table(const TableConfig& config, SigmaCache& cache);

/// header: test,method,H,h,err,iterations,offline_s,online_s,admissible,kappa
void write_csv(std::ostream& out, const std::vector<RunReport>& rows);

struct ConvergencePoint {
    std::size_t n = 0;  // inverse mesh size
    double error = 0.0;
};

struct ConvergenceStudy {
    std::vector<ConvergencePoint> points;
    double order = 0.0;  // least-squares slope of log(error) against log(1/n)
};

double fitted_order(const std::vector<ConvergencePoint>& points);

/// Relative H¹ distance between sigma1 on T_{1/n} and the interpolant of
/// e^{-64(x+y)}/mean, for b = (64, 64).
ConvergenceStudy sigma1_exact_convergence(const std::vector<std::size_t>& ns,
                                          const InvariantMeasureOptions& opts = {});

/// b = (1, 1), u = sin(πx) sin(πy) with the matching source. The method is
/// run on T_H with h = H/refine and the H¹ seminorm error against the
/// exact gradient is reported.
ConvergenceStudy manufactured_convergence(const std::vector<std::size_t>& H_invs,
                                          std::size_t refine = 4,
                                          Method method = Method::Sigma1h,
                                          const InvariantMeasureOptions& opts = {});

} // namespace imfem
