// imfem: invariant-measure finite elements for advection-dominated problems.

#include "imfem/experiments.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace imfem;

namespace {

struct Common {
    std::string test = "i";
    std::size_t H_inv = 16;
    std::size_t h_inv = 0;
    std::size_t ref_inv = 0;  // 0: no reference (solve) or 512 (table)
    std::string method = "P1";
    std::vector<std::string> methods;
    std::vector<std::string> tests;
    std::vector<std::size_t> h_list;
    double lambda = 1e-3;
    double tol = 1e-3;
    int max_iter = 500;
    int quad_degree = 5;
    std::string out;
    std::string sigma_cache_dir;
    std::string ref_cache_dir;
    std::string gls_field = "B2";
    std::string kind = "sigma1";
    std::string study = "sigma1";
    std::size_t refine = 4;
};

// raised for invalid flag combinations detected after parsing
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

InvariantMeasureOptions sigma_options(const Common& c) {
    InvariantMeasureOptions o;
    o.lambda = c.lambda;
    o.tol = c.tol;
    o.max_iter = c.max_iter;
    o.quad_degree = c.quad_degree;
    return o;
}

Method method_of(const std::string& name) {
    if (auto m = parse_method(name))
        return *m;
    throw UsageError("unknown method '" + name + "'");
}

VelocityField field_of(const std::string& id) {
    try {
        return velocity_catalog(id);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

void require_admissible(Method m, const VelocityField& b) {
    if (m == Method::Sigma1Exact && !b.irrotational())
        throw UsageError("Sigma1Exact needs an irrotational field; test " + b.test_id +
                         " has a rotational part");
}

GlsField gls_of(const std::string& s) {
    return s == "B2bar" ? GlsField::B2bar : GlsField::B2;
}

template <typename Write>
void emit(const std::string& path, Write&& write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        return;
    }
    // render first so a failure never leaves a truncated file behind
    std::ostringstream buf;
    write(buf);
    std::ofstream f(path);
    if (!f)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    f << buf.str();
}

int run_sigma(const Common& c) {
    const VelocityField b = field_of(c.test);
    if (c.h_inv == 0)
        throw UsageError("--h is required");
    SigmaCache cache(c.sigma_cache_dir);
    const auto m = c.kind == "sigma1" ? cache.sigma1(b, c.h_inv, c.H_inv, sigma_options(c))
                                      : cache.sigma2_0(b, c.h_inv, sigma_options(c));
    std::cerr << c.kind << " test=" << c.test << " h=1/" << c.h_inv
              << " iterations=" << m->result.iterations
              << " deviation=" << m->result.final_deviation << '\n';
    if (c.out.empty())
        throw UsageError("--out is required");
    save_field(c.out, m->result.sigma);
    return 0;
}

int run_solve(const Common& c) {
    const VelocityField b = field_of(c.test);
    const Method method = method_of(c.method);
    require_admissible(method, b);

    MethodConfig mc;
    mc.method = method;
    mc.quad_degree = c.quad_degree;
    mc.gls_field = gls_of(c.gls_field);

    SigmaInputs inputs;
    auto mesh_H = std::make_shared<const Mesh>(c.H_inv);
    if (uses_fine_mesh(method)) {
        if (c.h_inv == 0)
            throw UsageError("--h is required for " + std::string(method_name(method)));
        SigmaCache cache(c.sigma_cache_dir);
        const auto s1 = cache.sigma1(b, c.h_inv, c.H_inv, sigma_options(c));
        if (method == Method::Sigma1h && !s1->result.elementwise_positive_on(*mesh_H))
            throw PositivityError("sigma1 has a non-positive element integral on the coarse mesh");
        inputs.sigma1 = s1->result.sigma;
        if (method != Method::Sigma1h) {
            const auto s20 = cache.sigma2_0(b, c.h_inv, sigma_options(c));
            const ComposedSigma2 comp = compose_sigma2(s20->result.sigma, s1->result.sigma, *mesh_H, c.quad_degree);
            inputs.sigma2_0 = s20->result.sigma;
            inputs.kappa = comp.kappa;
        }
    }
    const FeFunction u = solve_u(mesh_H, mc, b, inputs);
    if (c.ref_inv > 0) {
        const FeFunction ref = reference_solution(b, c.ref_inv, c.ref_cache_dir);
        std::cout << "err " << relative_error(u, ref, layer_region(b)) << '\n';
    }
    if (!c.out.empty())
        save_field(c.out, u);
    return 0;
}

int run_table_cmd(const Common& c) {
    TableConfig cfg;
    cfg.tests = c.tests.empty() ? catalog_ids() : c.tests;
    for (const auto& t : cfg.tests)
        field_of(t);
    if (c.methods.empty())
        cfg.methods.assign(std::begin(all_methods), std::end(all_methods));
    for (const auto& m : c.methods)
        cfg.methods.push_back(method_of(m));
    cfg.H_inv = c.H_inv;
    cfg.h_list = c.h_list;
    cfg.n_ref = c.ref_inv ? c.ref_inv : 512;
    cfg.sigma_opts = sigma_options(c);
    cfg.quad_degree = c.quad_degree;
    cfg.gls_field = gls_of(c.gls_field);
    cfg.reference_cache_dir = c.ref_cache_dir;

    SigmaCache cache(c.sigma_cache_dir);
    const auto rows = run_table(cfg, cache);
    for (const auto& r : rows)
        if (!r.note.empty())
            std::cerr << r.test_id << ' ' << method_name(r.method) << ' '
                      << (r.h_inv ? "h=1/" + std::to_string(*r.h_inv) : std::string()) << ": "
                      << r.note << '\n';
    emit(c.out, [&](std::ostream& os) { write_csv(os, rows); });
    return 0;
}

int run_convergence(const Common& c) {
    ConvergenceStudy s;
    if (c.study == "sigma1") {
        s = sigma1_exact_convergence(c.h_list.empty() ? std::vector<std::size_t>{32, 64, 128}
                                                      : c.h_list,
                                     sigma_options(c));
    } else {
        s = manufactured_convergence(c.h_list.empty() ? std::vector<std::size_t>{16, 32, 64}
                                                      : c.h_list,
                                     c.refine, method_of(c.method), sigma_options(c));
    }
    emit(c.out, [&](std::ostream& os) {
        os << "n,error\n";
        for (const auto& p : s.points)
            os << p.n << ',' << p.error << '\n';
        os << "# order " << s.order << '\n';
    });
    return 0;
}

int run_coercivity(const Common& c) {
    const VelocityField b = field_of(c.test);
    const Mesh mesh(c.H_inv);
    std::cout << coercivity_diagnostic(mesh, b, c.quad_degree) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Invariant-measure finite elements for advection-diffusion"};
    app.require_subcommand(1);
    app.set_help_flag("--help", "print this help");  // -h would clash with --h
    Common c;

    auto positive = CLI::PositiveNumber;
    auto add_sigma_flags = [&](CLI::App* s) {
        s->add_option("--lambda", c.lambda, "relaxation parameter")->check(positive);
        s->add_option("--tol", c.tol, "stopping tolerance")->check(positive);
        s->add_option("--max-iter", c.max_iter, "iteration cap")->check(positive);
        s->add_option("--sigma-cache-dir", c.sigma_cache_dir, "directory for cached measures")
            ->envname("IMFEM_SIGMA_CACHE");
    };
    auto add_common = [&](CLI::App* s) {
        s->add_option("--H", c.H_inv, "coarse mesh, cells per side")->check(positive);
        s->add_option("--quad-degree", c.quad_degree, "triangle quadrature degree")
            ->check(CLI::IsMember({1, 2, 5}));
        s->add_option("--out", c.out, "output path");
    };
    const auto methods = CLI::IsMember({"P1", "P1GLS", "Sigma1Exact", "Sigma1h", "Sigma2h",
                                        "Sigma2hGLS"});
    const auto gls = CLI::IsMember({"B2", "B2bar"});

    auto* sigma = app.add_subcommand("sigma", "compute a discrete invariant measure");
    sigma->add_option("--test", c.test, "test id (i..vii)");
    sigma->add_option("--h", c.h_inv, "fine mesh, cells per side")->check(positive);
    sigma->add_option("--kind", c.kind, "sigma1 or sigma2_0")
        ->check(CLI::IsMember({"sigma1", "sigma2_0"}));
    add_common(sigma);
    add_sigma_flags(sigma);

    auto* solve = app.add_subcommand("solve", "solve for u with one method");
    solve->add_option("--test", c.test, "test id (i..vii)");
    solve->add_option("--h", c.h_inv, "fine mesh, cells per side")->check(positive);
    solve->add_option("--ref", c.ref_inv, "reference mesh; prints the relative error")
        ->check(positive);
    solve->add_option("--ref-cache-dir", c.ref_cache_dir, "directory for reference solutions");
    solve->add_option("--method", c.method, "discretization")->check(methods);
    solve->add_option("--gls-field", c.gls_field, "field in the GLS parameter")->check(gls);
    add_common(solve);
    add_sigma_flags(solve);

    auto* table = app.add_subcommand("table", "error table as CSV");
    table->add_option("--test", c.tests, "test ids, default all")->delimiter(',');
    table->add_option("--h-list", c.h_list, "fine meshes, default the published columns")
        ->delimiter(',')
        ->check(positive);
    table->add_option("--ref", c.ref_inv, "reference mesh, cells per side")->check(positive);
    table->add_option("--ref-cache-dir", c.ref_cache_dir, "directory for reference solutions");
    table->add_option("--method", c.methods, "methods, default all")
        ->delimiter(',')
        ->check(methods);
    table->add_option("--gls-field", c.gls_field, "field in the GLS parameter")->check(gls);
    add_common(table);
    add_sigma_flags(table);

    auto* conv = app.add_subcommand("convergence", "mesh convergence study");
    conv->add_option("--study", c.study, "sigma1 or manufactured")
        ->check(CLI::IsMember({"sigma1", "manufactured"}));
    conv->add_option("--h-list", c.h_list, "meshes, cells per side")->delimiter(',')->check(positive);
    conv->add_option("--refine", c.refine, "H/h for the manufactured study")->check(positive);
    conv->add_option("--method", c.method, "discretization for the manufactured study")
        ->check(methods);
    add_common(conv);
    add_sigma_flags(conv);

    auto* coer = app.add_subcommand("coercivity", "smallest eigenvalue of the symmetric part");
    coer->add_option("--test", c.test, "test id (i..vii)");
    add_common(coer);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    try {
        if (*sigma)
            return run_sigma(c);
        if (*solve)
            return run_solve(c);
        if (*table)
            return run_table_cmd(c);
        if (*conv) {
            if (c.study == "manufactured" && c.method == "P1")
                c.method = "Sigma1h";
            return run_convergence(c);
        }
        return run_coercivity(c);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    }
}
