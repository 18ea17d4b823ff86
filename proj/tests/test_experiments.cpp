#include "doctest.h"
#include "support.hpp"

#include "imfem/experiments.hpp"

#include <filesystem>
#include <random>
#include <sstream>

using namespace imfem;

namespace {

std::shared_ptr<const Mesh> mesh(std::size_t n) { return std::make_shared<const Mesh>(n); }

const std::filesystem::path data_dir = IMFEM_TEST_DATA;

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

} // namespace

TEST_SUITE("experiments") {

TEST_CASE("velocity catalog values") {
    CHECK(catalog_ids() == std::vector<std::string>{"i", "ii", "iii", "iv", "v", "vi", "vii"});
    const Vec2 b1 = velocity_catalog("i").b({0.5, 0.5});
    CHECK(b1.x == doctest::Approx(64.0));
    CHECK(b1.y == doctest::Approx(64.0));
    const Vec2 b2 = velocity_catalog("ii").b({0.0, 0.0});
    CHECK(b2.x == doctest::Approx(64.0 + 50.34));
    CHECK(b2.y == doctest::Approx(64.0));
    CHECK(velocity_catalog("i").b_inf_norm == doctest::Approx(64.0 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK_THROWS(velocity_catalog("viii"));
    for (const char* id : {"i", "ii", "iii", "iv"})
        CHECK(velocity_catalog(id).irrotational());
    for (const char* id : {"v", "vi", "vii"})
        CHECK_FALSE(velocity_catalog(id).irrotational());
}

TEST_CASE("divergence, curl and potential against finite differences") {
    std::mt19937 rng(10);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    const double e = 1e-5;
    for (const auto& id : catalog_ids()) {
        const VelocityField f = velocity_catalog(id);
        for (int s = 0; s < 100; ++s) {
            const Point x{u(rng), u(rng)};
            const Vec2 bxp = f.b({x.x + e, x.y}), bxm = f.b({x.x - e, x.y});
            const Vec2 byp = f.b({x.x, x.y + e}), bym = f.b({x.x, x.y - e});
            const double div = (bxp.x - bxm.x + byp.y - bym.y) / (2 * e);
            CHECK(std::abs(div - f.div_b(x)) < 1e-6 * std::max(1.0, std::abs(div)));
            const double curl = (bxp.y - bxm.y - byp.x + bym.x) / (2 * e);
            if (f.irrotational()) {
                CHECK(std::abs(curl) / f.b_inf_norm < 1e-5);
                const double px = (f.potential({x.x + e, x.y}) - f.potential({x.x - e, x.y})) / (2 * e);
                const double py = (f.potential({x.x, x.y + e}) - f.potential({x.x, x.y - e})) / (2 * e);
                const Vec2 bx = f.b(x);
                CHECK(std::abs(px - bx.x) < 1e-6 * f.b_inf_norm);
                CHECK(std::abs(py - bx.y) < 1e-6 * f.b_inf_norm);
            }
        }
    }
}

TEST_CASE("boundary layer region") {
    CHECK(layer_width(2.0 * std::exp(1.0)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    const double norm_i = 64.0 * std::sqrt(2.0);
    CHECK(layer_width(norm_i) == doctest::Approx(2.0 / norm_i * std::log(norm_i / 2.0)).epsilon(1e-14));
    CHECK(layer_width(norm_i) == doctest::Approx(0.0843).epsilon(1e-3));
    CHECK_THROWS(layer_width(2.0));
    const auto in_layer = layer_region(velocity_catalog("i"));
    CHECK_FALSE(in_layer({0.5, 0.5}));
    CHECK(in_layer({0.5, 0.99}));
    CHECK(in_layer({0.99, 0.5}));
    CHECK(in_layer({0.5, 0.01}));
    CHECK_FALSE(in_layer({0.01, 0.5}));
}

TEST_CASE("relative error metric") {
    const auto m = mesh(16);
    const auto nowhere = [](const Point&) { return false; };
    std::mt19937 rng(1);
    FeFunction r(m, testing::random_vector(rng, m->num_nodes()));
    CHECK(relative_error(r, r, nowhere) == 0.0);
    const auto x = interpolate_nodal(m, [](const Point& p) { return p.x; });
    CHECK(relative_error(FeFunction::constant(mesh(4), 0.0), x, nowhere) ==
          doctest::Approx(1.0).epsilon(1e-14));
    // a coarse interpolant of an affine reference is exact
    const auto xf = interpolate_nodal(mesh(32), [](const Point& p) { return p.x + 2 * p.y; });
    const auto xc = interpolate_nodal(mesh(8), [](const Point& p) { return p.x + 2 * p.y; });
    CHECK(relative_error(xc, xf, layer_region(velocity_catalog("ii"))) < 1e-13);
}

TEST_CASE("reference solutions") {
    const VelocityField b0 = constant_field({0.0, 0.0});
    const FeFunction z = reference_solution(b0, 16, {}, [](const Point&) { return 0.0; });
    for (double v : z.coeffs())
        CHECK(v == 0.0);

    const auto nowhere = [](const Point&) { return false; };
    const FeFunction u32 = reference_solution(b0, 32);
    const FeFunction u64 = reference_solution(b0, 64);
    const FeFunction u128 = reference_solution(b0, 128);
    const double d32 = relative_error(u32, u64, nowhere);
    const double d64 = relative_error(u64, u128, nowhere);
    CHECK(std::abs(std::log2(d32 / d64) - 1.0) <= 0.2);

    const auto dir = data_dir / "ref-roundtrip";
    std::filesystem::remove_all(dir);
    const VelocityField b = velocity_catalog("iii");
    const FeFunction first = reference_solution(b, 32, dir);
    CHECK_FALSE(std::filesystem::is_empty(dir));
    const FeFunction again = reference_solution(b, 32, dir);
    for (std::size_t i = 0; i < first.coeffs().size(); ++i)
        CHECK(again[i] == first[i]);
}

TEST_CASE("reference mesh 1/512 is converged in the error metric, test i") {
    const VelocityField b = velocity_catalog("i");
    const FeFunction fine = reference_solution(b, 512, data_dir);
    const FeFunction half = reference_solution(b, 256, data_dir);
    CHECK(relative_error(half, fine, layer_region(b)) < 0.01);
}

TEST_CASE("coercivity diagnostic") {
    const double lap = coercivity_diagnostic(Mesh(64), constant_field({0.0, 0.0}));
    CHECK(std::abs(lap - 2.0 * M_PI * M_PI) < 0.05 * 2.0 * M_PI * M_PI);
    const Mesh coarse(16);
    for (const auto& id : catalog_ids()) {
        const double v = coercivity_diagnostic(coarse, velocity_catalog(id));
        if (id == "i")
            CHECK(v > 0.0);
        else
            CHECK(v < 0.0);
    }
}

TEST_CASE("order fit") {
    std::vector<ConvergencePoint> pts;
    for (std::size_t n : {8u, 16u, 32u})
        pts.push_back({n, 3.0 / (static_cast<double>(n) * n)});
    CHECK(fitted_order(pts) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS(fitted_order({{8, 1.0}}));
}

TEST_CASE("published columns") {
    CHECK(published_h_columns("i") == std::vector<std::size_t>{16, 80, 150, 230});
    CHECK(published_h_columns("iv") == std::vector<std::size_t>{16, 112, 150, 230});
    CHECK(published_h_columns("vii") == std::vector<std::size_t>{17, 144, 150, 230});
}

TEST_CASE("sigma cache memoizes and persists") {
    const auto dir = data_dir / "sigma-roundtrip";
    std::filesystem::remove_all(dir);
    const VelocityField b = velocity_catalog("vi");
    InvariantMeasureOptions o;
    SigmaCache cache(dir);
    const auto a = cache.sigma1(b, 32, 16, o);
    CHECK(cache.sigma1(b, 32, 16, o) == a);
    SigmaCache reopened(dir);
    const auto c = reopened.sigma1(b, 32, 16, o);
    CHECK(c->seconds == 0.0);
    CHECK(c->result.iterations == a->result.iterations);
    for (std::size_t i = 0; i < a->result.sigma.coeffs().size(); ++i)
        CHECK(c->result.sigma[i] == a->result.sigma[i]);
    // a different key is a different entry
    CHECK(cache.sigma1(b, 32, 8, o) != a);
}

TEST_CASE("table rows, CSV and caching") {
    SigmaCache cache;
    TableConfig cfg;
    cfg.tests = {"iv"};
    cfg.n_ref = 128;
    cfg.h_list = {16, 64};
    cfg.reference_cache_dir = data_dir;
    CHECK(run_table(cfg, cache).empty());

    cfg.methods = {Method::P1, Method::Sigma1h, Method::Sigma2hGLS};
    const auto rows = run_table(cfg, cache);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].method == Method::P1);
    CHECK_FALSE(rows[0].h_inv.has_value());
    CHECK(rows[0].iterations == 0);

    const RunReport* bad = nullptr;
    for (const auto& r : rows) {
        if (r.method == Method::Sigma1h && r.h_inv == 16u)
            bad = &r;
        else if (r.admissible)
            CHECK(*r.err >= 0.0);
    }
    REQUIRE(bad != nullptr);
    CHECK_FALSE(bad->admissible);
    CHECK_FALSE(bad->err.has_value());

    std::ostringstream csv;
    write_csv(csv, rows);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "test,method,H,h,err,iterations,offline_s,online_s,admissible,kappa");
    int n = 0;
    while (std::getline(in, line)) {
        const auto cells = split(line);
        REQUIRE(cells.size() == 10);
        CHECK(cells[0] == "iv");
        if (cells[8] == "false")
            CHECK(cells[4].empty());
        else
            CHECK_FALSE(cells[4].empty());
        ++n;
    }
    CHECK(n == 5);

    // second pass: measures come from the cache
    const auto again = run_table(cfg, cache);
    REQUIRE(again.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(again[i].err == rows[i].err);
        if (rows[i].method != Method::P1 && rows[i].admissible) {
            INFO("row " << i);
            CHECK(again[i].offline_seconds < 0.1 * rows[i].offline_seconds + 1e-3);
        }
        // timer noise dominates below a few milliseconds
        CHECK(again[i].online_seconds < 2.0 * rows[i].online_seconds + 5e-3);
    }
}

}
