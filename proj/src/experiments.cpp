#include "imfem/experiments.hpp"

#include "imfem/assembly.hpp"

#include <json.hpp>

#include <chrono>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace imfem {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

} // namespace

const std::vector<std::string>& catalog_ids() {
    static const std::vector<std::string> ids = {"i", "ii", "iii", "iv", "v", "vi", "vii"};
    return ids;
}

VelocityField velocity_catalog(std::string_view test_id) {
    struct Entry {
        std::string_view id;
        double l1, l2, l3, l4;
    };
    static constexpr Entry table[] = {
        {"i", 0.0, 0.0, 0.0, 0.0},        {"ii", 0.0, 50.34, 0.0, 0.0},
        {"iii", 0.0, 50.34, 30.0, 0.0},   {"iv", 20.0, 50.34, 0.0, 0.0},
        {"v", 0.0, 50.34, 0.0, 64.0},     {"vi", 20.0, 50.34, 0.0, 64.0},
        {"vii", 0.0, 50.34, 30.0, 64.0},
    };
    for (const auto& e : table)
        if (e.id == test_id)
            return parametric_field(std::string(e.id), {64.0, 64.0, e.l1, e.l2, e.l3, e.l4});
    throw std::invalid_argument("unknown test id '" + std::string(test_id) + "'");
}

double layer_width(double b_inf_norm) {
    if (!(b_inf_norm > 2.0))
        throw std::domain_error("boundary layer width needs |b| > 2");
    return 2.0 / b_inf_norm * std::log(0.5 * b_inf_norm);
}

RegionPredicate layer_region(const VelocityField& b) {
    const double delta = layer_width(b.b_inf_norm);
    return [delta](const Point& x) {
        return x.y > 1.0 - delta || x.x > 1.0 - delta || x.y < delta;
    };
}

double relative_error(const FeFunction& u_H, const FeFunction& u_ref, const RegionPredicate& layer) {
    const Mesh& ref = u_ref.mesh();
    const Mesh& coarse = u_H.mesh();
    const TriangleQuadrature q = interior_triangle_rule();
    const double jac = 2.0 * ref.triangle_area();
    double num = 0.0;
    for (std::size_t k = 0; k < ref.num_triangles(); ++k) {
        // a coarse element is either measured whole or excluded whole
        const std::size_t K = coarse.locate(ref.barycenter(k)).triangle;
        if (layer(coarse.barycenter(K)))
            continue;
        const Vec2 gref = u_ref.gradient(k);
        for (std::size_t p = 0; p < q.size(); ++p) {
            const Point x = ref.from_barycentric(k, q.points[p]);
            const Vec2 d = evaluate_cross_mesh(u_H, x).gradient - gref;
            num += q.weights[p] * jac * dot(d, d);
        }
    }
    const double den = h1_seminorm(u_ref);
    if (!(den > 0.0))
        throw std::domain_error("reference solution has a vanishing gradient norm");
    return std::sqrt(num) / den;
}

FeFunction reference_solution(const VelocityField& b, std::size_t n_ref,
                              const std::filesystem::path& cache_dir, const ScalarFunction& f) {
    const bool cacheable = !cache_dir.empty() && !f;
    const auto path = cache_dir / ("ref_" + b.test_id + "_n" + std::to_string(n_ref) + ".p1");
    if (cacheable && std::filesystem::exists(path)) {
        FeFunction u = load_field(path.string());
        if (u.mesh().subdivisions() == n_ref)
            return u;
    }

    auto mesh = std::make_shared<const Mesh>(n_ref);
    MethodConfig cfg;
    cfg.method = Method::P1;
    if (f)
        cfg.f = f;
    FeFunction u = solve_u(mesh, cfg, b);
    if (cacheable) {
        std::filesystem::create_directories(cache_dir);
        save_field(path.string(), u);
    }
    return u;
}

double coercivity_diagnostic(const Mesh& mesh_H, const VelocityField& b, int quad_degree) {
    const LinearSystem sys =
        assemble_plain_p1(mesh_H, b, [](const Point&) { return 0.0; }, quad_degree);
    const SparseMatrix mass = assemble_mass(mesh_H, sys.dofs);
    return min_generalized_eig_sym(sys.matrix, mass).value;
}

std::vector<std::size_t> published_h_columns(std::string_view test_id) {
    if (test_id == "i")
        return {16, 80, 150, 230};
    if (test_id == "ii" || test_id == "iv" || test_id == "vi")
        return {16, 112, 150, 230};
    if (test_id == "iii")
        return {16, 144, 150, 230};
    if (test_id == "v")
        return {17, 112, 150, 230};
    if (test_id == "vii")
        return {17, 144, 150, 230};
    throw std::invalid_argument("no published columns for test '" + std::string(test_id) + "'");
}

// ---------------------------------------------------------------------------
// sigma cache

template <typename Compute>
std::shared_ptr<const CachedMeasure> SigmaCache::lookup(const std::string& key, Compute&& compute) {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end())
        return it->second;

    const auto field_path = dir_ / (key + ".p1");
    const auto meta_path = dir_ / (key + ".json");
    if (!dir_.empty() && std::filesystem::exists(field_path) && std::filesystem::exists(meta_path)) {
        std::ifstream in(meta_path);
        const auto meta = nlohmann::json::parse(in);
        auto entry = std::make_shared<CachedMeasure>(CachedMeasure{
            InvariantMeasureResult{load_field(field_path.string()), meta.at("iterations").get<int>(),
                                   meta.at("final_deviation").get<double>(),
                                   meta.at("mean").get<double>(), 0.0},
            0.0});
        return entries_[key] = std::move(entry);
    }

    const auto start = std::chrono::steady_clock::now();
    InvariantMeasureResult r = compute();
    auto entry = std::make_shared<CachedMeasure>(CachedMeasure{std::move(r), seconds_since(start)});
    if (!dir_.empty()) {
        std::filesystem::create_directories(dir_);
        save_field(field_path.string(), entry->result.sigma);
        std::ofstream out(meta_path);
        out << nlohmann::json{{"iterations", entry->result.iterations},
                              {"final_deviation", entry->result.final_deviation},
                              {"mean", entry->result.mean}}
                   .dump(2)
            << '\n';
    }
    return entries_[key] = std::move(entry);
}

namespace {

std::string options_tag(const InvariantMeasureOptions& o) {
    std::ostringstream s;
    s << "l" << format_double(o.lambda) << "_t" << format_double(o.tol) << "_q" << o.quad_degree;
    return s.str();
}

} // namespace

std::shared_ptr<const CachedMeasure> SigmaCache::sigma1(const VelocityField& b, std::size_t h_inv,
                                                        std::size_t H_inv,
                                                        const InvariantMeasureOptions& opts) {
    const std::string key = "sigma1_" + b.test_id + "_h" + std::to_string(h_inv) + "_H" +
                            std::to_string(H_inv) + "_" + options_tag(opts);
    return lookup(key, [&] {
        return compute_sigma1(std::make_shared<const Mesh>(h_inv),
                              std::make_shared<const Mesh>(H_inv), b, opts);
    });
}

std::shared_ptr<const CachedMeasure> SigmaCache::sigma2_0(const VelocityField& b, std::size_t h_inv,
                                                          const InvariantMeasureOptions& opts) {
    const std::string key =
        "sigma2_0_" + b.test_id + "_h" + std::to_string(h_inv) + "_" + options_tag(opts);
    return lookup(key, [&] {
        return compute_sigma2_0(std::make_shared<const Mesh>(h_inv), b, opts);
    });
}

std::shared_ptr<const PreparedWeight>
SigmaCache::prepared(const std::string& key, const std::function<PreparedWeight()>& compute) {
    {
        std::lock_guard lock(mutex_);
        if (auto it = prepared_.find(key); it != prepared_.end())
            return it->second;
    }
    auto entry = std::make_shared<const PreparedWeight>(compute());
    std::lock_guard lock(mutex_);
    return prepared_.emplace(key, std::move(entry)).first->second;
}

// ---------------------------------------------------------------------------
// tables

namespace {

struct MeasureRow {
    SigmaInputs inputs;
    int iterations = 0;
    double offline = 0.0;
    bool admissible = true;
    std::optional<double> kappa;
    std::string note;
};

MeasureRow prepare_measures(Method method, const VelocityField& b, std::size_t h_inv,
                            const Mesh& mesh_H, const TableConfig& cfg, SigmaCache& cache) {
    MeasureRow row;
    const auto start = std::chrono::steady_clock::now();
    std::shared_ptr<const CachedMeasure> s1;
    std::shared_ptr<const CachedMeasure> s20;
    try {
        s1 = cache.sigma1(b, h_inv, cfg.H_inv, cfg.sigma_opts);
        row.iterations = s1->result.iterations;
        row.inputs.sigma1 = s1->result.sigma;
        if (method != Method::Sigma1h) {
            s20 = cache.sigma2_0(b, h_inv, cfg.sigma_opts);
            row.iterations += s20->result.iterations;
            row.inputs.sigma2_0 = s20->result.sigma;
        }
    } catch (const std::exception& e) {
        row.admissible = false;
        row.note = e.what();
        row.offline = seconds_since(start);
        return row;
    }

    // positivity, kappa and the moments on T_H follow from the measures
    const std::string key = std::string(method_name(method)) + "_" + b.test_id + "_h" +
                            std::to_string(h_inv) + "_H" + std::to_string(cfg.H_inv) + "_q" +
                            std::to_string(cfg.quad_degree) + "_" + options_tag(cfg.sigma_opts);
    const auto prep = cache.prepared(key, [&] {
        PreparedWeight p;
        SigmaInputs in = row.inputs;
        try {
            if (method == Method::Sigma1h) {
                if (!s1->result.elementwise_positive_on(mesh_H)) {
                    p.admissible = false;
                    p.note = "sigma1 has a non-positive element integral on the coarse mesh";
                }
            } else {
                const ComposedSigma2 composed =
                    compose_sigma2(s20->result.sigma, s1->result.sigma, mesh_H, cfg.quad_degree);
                p.kappa = composed.kappa;
                in.kappa = composed.kappa;
            }
        } catch (const std::exception& e) {
            p.admissible = false;
            p.note = e.what();
        }
        if (p.admissible) {
            const std::size_t m = default_subdivisions(mesh_H, s1->result.sigma.mesh());
            p.moments = std::make_shared<const WeightMoments>(
                weight_moments(mesh_H, method_weight(method, b, in), cfg.quad_degree, m));
        }
        return p;
    });
    row.admissible = prep->admissible;
    row.note = prep->note;
    row.kappa = prep->kappa;
    row.inputs.kappa = prep->kappa.value_or(0.0);
    row.inputs.moments = prep->moments;
    row.offline = seconds_since(start);
    return row;
}

} // namespace

std::vector<RunReport> run_table(const TableConfig& cfg, SigmaCache& cache) {
    std::vector<RunReport> rows;
    if (cfg.methods.empty())
        return rows;

    auto mesh_H = std::make_shared<const Mesh>(cfg.H_inv);
    for (const auto& test : cfg.tests) {
        const VelocityField b = velocity_catalog(test);
        const FeFunction ref = reference_solution(b, cfg.n_ref, cfg.reference_cache_dir);
        const RegionPredicate layer = layer_region(b);

        MethodConfig mc;
        mc.quad_degree = cfg.quad_degree;
        mc.gls_field = cfg.gls_field;

        for (Method method : cfg.methods) {
            mc.method = method;
            if (method == Method::Sigma1Exact && !b.irrotational())
                continue;

            std::vector<std::optional<std::size_t>> hs;
            if (uses_fine_mesh(method)) {
                for (std::size_t h : cfg.h_list.empty() ? published_h_columns(test) : cfg.h_list)
                    hs.emplace_back(h);
            } else {
                hs.emplace_back(std::nullopt);
            }

            for (const auto& h : hs) {
                RunReport r;
                r.test_id = test;
                r.method = method;
                r.H_inv = cfg.H_inv;
                r.h_inv = h;

                SigmaInputs inputs;
                if (h) {
                    MeasureRow m = prepare_measures(method, b, *h, *mesh_H, cfg, cache);
                    r.iterations = m.iterations;
                    r.offline_seconds = m.offline;
                    r.admissible = m.admissible;
                    r.kappa = m.kappa;
                    r.note = m.note;
                    inputs = std::move(m.inputs);
                }
                if (r.admissible) {
                    try {
                        const auto start = std::chrono::steady_clock::now();
                        const FeFunction u = solve_u(mesh_H, mc, b, inputs);
                        r.online_seconds = seconds_since(start);
                        r.err = relative_error(u, ref, layer);
                    } catch (const PositivityError& e) {
                        r.admissible = false;
                        r.note = e.what();
                    } catch (const LinearAlgebraError& e) {
                        r.admissible = false;
                        r.note = e.what();
                    }
                }
                rows.push_back(std::move(r));
            }
        }
    }
    return rows;
}

void write_csv(std::ostream& out, const std::vector<RunReport>& rows) {
    out << "test,method,H,h,err,iterations,offline_s,online_s,admissible,kappa\n";
    for (const auto& r : rows) {
        out << r.test_id << ',' << method_name(r.method) << ','
            << format_double(1.0 / static_cast<double>(r.H_inv)) << ',';
        if (r.h_inv)
            out << format_double(1.0 / static_cast<double>(*r.h_inv));
        out << ',';
        if (r.admissible && r.err)
            out << format_double(*r.err);
        out << ',' << r.iterations << ',' << format_double(r.offline_seconds) << ','
            << format_double(r.online_seconds) << ',' << (r.admissible ? "true" : "false") << ',';
        if (r.kappa)
            out << format_double(*r.kappa);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// convergence studies

double fitted_order(const std::vector<ConvergencePoint>& points) {
    if (points.size() < 2)
        throw std::invalid_argument("an order fit needs at least two points");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& p : points) {
        if (!(p.error > 0.0))
            throw std::domain_error("cannot fit an order through a zero error");
        const double x = std::log(1.0 / static_cast<double>(p.n));
        const double y = std::log(p.error);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = static_cast<double>(points.size());
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

ConvergenceStudy sigma1_exact_convergence(const std::vector<std::size_t>& ns,
                                          const InvariantMeasureOptions& opts) {
    const VelocityField b = velocity_catalog("i");
    // mean of e^{-64(x+y)} over the unit square
    const double g = -std::expm1(-64.0) / 64.0;
    const double mean = g * g;

    ConvergenceStudy study;
    for (std::size_t n : ns) {
        auto mesh = std::make_shared<const Mesh>(n);
        const InvariantMeasureResult r = compute_sigma1(mesh, mesh, b, opts);
        const FeFunction exact = interpolate_nodal(
            mesh, [mean](const Point& x) { return std::exp(-64.0 * (x.x + x.y)) / mean; });
        std::vector<double> diff(mesh->num_nodes());
        for (std::size_t i = 0; i < diff.size(); ++i)
            diff[i] = r.sigma[i] - exact[i];
        const FeFunction d(mesh, std::move(diff));
        const double num = std::hypot(l2_norm(d), h1_seminorm(d));
        const double den = std::hypot(l2_norm(exact), h1_seminorm(exact));
        study.points.push_back({n, num / den});
    }
    study.order = fitted_order(study.points);
    return study;
}

ConvergenceStudy manufactured_convergence(const std::vector<std::size_t>& H_invs,
                                          std::size_t refine, Method method,
                                          const InvariantMeasureOptions& opts) {
    constexpr double pi = std::numbers::pi;
    const VelocityField b = constant_field({1.0, 1.0}, "manufactured");
    MethodConfig mc;
    mc.method = method;
    mc.f = [](const Point& x) {
        const double sx = std::sin(pi * x.x), sy = std::sin(pi * x.y);
        const double cx = std::cos(pi * x.x), cy = std::cos(pi * x.y);
        return 2.0 * pi * pi * sx * sy + pi * (cx * sy + sx * cy);
    };

    ConvergenceStudy study;
    for (std::size_t H_inv : H_invs) {
        auto mesh_H = std::make_shared<const Mesh>(H_inv);
        SigmaInputs inputs;
        if (uses_fine_mesh(method)) {
            auto mesh_h = std::make_shared<const Mesh>(H_inv * refine);
            InvariantMeasureResult s1 = compute_sigma1(mesh_h, mesh_H, b, opts);
            if (method != Method::Sigma1h) {
                InvariantMeasureResult s20 = compute_sigma2_0(mesh_h, b, opts);
                ComposedSigma2 c = compose_sigma2(s20.sigma, s1.sigma, *mesh_H);
                inputs.sigma2_0 = std::move(s20.sigma);
                inputs.kappa = c.kappa;
            }
            inputs.sigma1 = std::move(s1.sigma);
        }
        const FeFunction u = solve_u(mesh_H, mc, b, inputs);

        const TriangleQuadrature q = triangle_rule(5);
        const double jac = 2.0 * mesh_H->triangle_area();
        double sum = 0.0;
        for (std::size_t k = 0; k < mesh_H->num_triangles(); ++k) {
            const Vec2 gu = u.gradient(k);
            for (std::size_t p = 0; p < q.size(); ++p) {
                const Point x = mesh_H->from_barycentric(k, q.points[p]);
                const Vec2 exact{pi * std::cos(pi * x.x) * std::sin(pi * x.y),
                                 pi * std::sin(pi * x.x) * std::cos(pi * x.y)};
                const Vec2 d = gu - exact;
                sum += q.weights[p] * jac * dot(d, d);
            }
        }
        study.points.push_back({H_inv, std::sqrt(sum)});
    }
    study.order = fitted_order(study.points);
    return study;
}

} // namespace imfem
