#include "doctest.h"

#include "imfem/fem.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

const std::filesystem::path work = std::filesystem::path(IMFEM_TEST_DATA) / "cli";

int run(const std::string& args, const std::string& env = {}) {
    std::filesystem::create_directories(work);
    const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + IMFEM_CLI_PATH + "\" " + args +
                            " > \"" + (work / "stdout.txt").string() + "\" 2> \"" +
                            (work / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// CSV with the two timing columns blanked
std::string without_timings(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
        std::stringstream ls(line);
        std::string cell;
        int col = 0;
        while (std::getline(ls, cell, ',')) {
            out += (col == 6 || col == 7) ? std::string() : cell;
            out += ',';
            ++col;
        }
        out += '\n';
    }
    return out;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with 1") {
    CHECK(run("") == 1);
    CHECK(run("coercivity --test i --bogus 3") == 1);
    CHECK(run("solve --test v --H 16 --method Sigma1Exact") == 1);
    CHECK(run("solve --test ix --H 16 --method P1") == 1);
    CHECK(run("sigma --test ii --h 0 --out x.p1") == 1);
    CHECK(run("solve --test ii --H 16 --method Sigma1h") == 1);
}

TEST_CASE("numerical failures exit with 2") {
    const std::string cache = (work / "sigma-cache").string();
    CHECK(run("solve --test iv --H 16 --h 16 --method Sigma1h --sigma-cache-dir \"" + cache + "\"") == 2);
    CHECK(slurp(work / "stderr.txt").find("numerical failure") != std::string::npos);
}

TEST_CASE("coercivity prints the diagnostic") {
    REQUIRE(run("coercivity --test iv --H 16") == 0);
    const double v = std::stod(slurp(work / "stdout.txt"));
    CHECK(std::abs(v + 95.21) <= 5.0);
}

TEST_CASE("sigma field file reads back identically") {
    const auto out = work / "sigma.p1";
    const auto cache = work / "env-cache";
    std::filesystem::remove_all(cache);
    REQUIRE(run("sigma --test ii --h 32 --out \"" + out.string() + "\"",
                "IMFEM_SIGMA_CACHE=\"" + cache.string() + "\"") == 0);
    CHECK(std::filesystem::exists(cache));
    const imfem::FeFunction f = imfem::load_field(out.string());
    CHECK(f.mesh().subdivisions() == 32);
    std::ostringstream again;
    imfem::write_field(again, f);
    CHECK(again.str() == slurp(out));
}

TEST_CASE("table output is deterministic apart from timings") {
    const std::string args = "table --test ii --H 16 --h-list 32,40 --ref 64 --method P1,Sigma1h,Sigma2hGLS";
    const auto a = work / "a.csv", b = work / "b.csv";
    REQUIRE(run(args + " --out \"" + a.string() + "\"") == 0);
    REQUIRE(run(args + " --out \"" + b.string() + "\"") == 0);
    const std::string ca = slurp(a);
    CHECK(ca.rfind("test,method,H,h,err,iterations,offline_s,online_s,admissible,kappa\n", 0) == 0);
    CHECK(without_timings(ca) == without_timings(slurp(b)));
}

TEST_CASE("solve reports an error against a reference") {
    REQUIRE(run("solve --test i --H 16 --method P1GLS --ref 64") == 0);
    const std::string out = slurp(work / "stdout.txt");
    REQUIRE(out.rfind("err ", 0) == 0);
    CHECK(std::stod(out.substr(4)) > 0.0);
}

}
