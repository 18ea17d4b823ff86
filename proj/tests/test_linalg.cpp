#include "doctest.h"
#include "support.hpp"

#include "imfem/assembly.hpp"
#include "imfem/linalg.hpp"

#include <algorithm>
#include <random>

using namespace imfem;
using testing::Dense;

namespace {

Dense random_dense(std::mt19937& rng, std::size_t n) {
    Dense a(n);
    for (auto& row : a)
        row = testing::random_vector(rng, n);
    return a;
}

Dense gram_plus_identity(const Dense& b) {
    const std::size_t n = b.size();
    Dense a(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = 0; k < n; ++k)
                a[i][j] += b[k][i] * b[k][j];
            if (i == j)
                a[i][j] += 1.0;
        }
    return a;
}

// Smallest eigenvalue of sym(A) x = λ M x through L^{-1} sym(A) L^{-T}.
double dense_min_generalized(const Dense& a, const Dense& m) {
    const std::size_t n = a.size();
    const Dense l = testing::cholesky(m);
    Dense s(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            s[i][j] = 0.5 * (a[i][j] + a[j][i]);
    // y = L^{-1} S column by column, then (L^{-1} y^T)^T
    auto lower_solve = [&](std::vector<double> b) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < i; ++k)
                b[i] -= l[i][k] * b[k];
            b[i] /= l[i][i];
        }
        return b;
    };
    Dense y(n, std::vector<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i)
            col[i] = s[i][j];
        col = lower_solve(col);
        for (std::size_t i = 0; i < n; ++i)
            y[i][j] = col[i];
    }
    Dense c(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = lower_solve(y[i]);
        for (std::size_t j = 0; j < n; ++j)
            c[j][i] = row[j];
    }
    const auto ev = testing::jacobi_eigenvalues(c);
    return *std::min_element(ev.begin(), ev.end());
}

} // namespace

TEST_SUITE("linalg") {

TEST_CASE("compression sums duplicates and sorts columns") {
    TripletBuffer t;
    t.add(0, 2, 1.0);
    t.add(0, 0, 2.0);
    t.add(0, 2, 3.0);
    t.add(1, 1, 5.0);
    TripletBuffer other;
    other.add(2, 0, -1.0);
    other.add(1, 1, 1.0);
    t.merge(std::move(other));
    const SparseMatrix a(3, t);
    CHECK(a.at(0, 2) == 4.0);
    CHECK(a.at(1, 1) == 6.0);
    CHECK(a.at(2, 0) == -1.0);
    CHECK(a.at(2, 2) == 0.0);
    CHECK(a.nonzeros() == 4);
    const auto off = a.row_offsets();
    const auto cols = a.column_indices();
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t p = off[r] + 1; p < off[r + 1]; ++p)
            CHECK(cols[p - 1] < cols[p]);
}

TEST_CASE("matrix operations") {
    std::mt19937 rng(1);
    const Dense d = random_dense(rng, 5);
    const SparseMatrix a = testing::to_sparse(d);
    const auto x = testing::random_vector(rng, 5);
    const auto y = a.multiply(x);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(y[i] == doctest::Approx(testing::dot(d[i], x)).epsilon(1e-14));
    CHECK(a.quadratic_form(x) == doctest::Approx(testing::dot(x, y)).epsilon(1e-14));
    const SparseMatrix at = a.transpose();
    const SparseMatrix s = a.symmetric_part();
    const SparseMatrix c = a.combine(2.0, at, -1.0);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(at.at(i, j) == d[j][i]);
            CHECK(s.at(i, j) == doctest::Approx(0.5 * (d[i][j] + d[j][i])));
            CHECK(c.at(i, j) == doctest::Approx(2.0 * d[i][j] - d[j][i]));
        }
}

TEST_CASE("direct solves") {
    TripletBuffer id;
    for (std::size_t i = 0; i < 4; ++i)
        id.add(i, i, 1.0);
    const std::vector<double> r{1.5, -2.0, 0.0, 7.0};
    CHECK(solve_direct(SparseMatrix(4, id), r) == r);

    TripletBuffer tri;
    for (std::size_t i = 0; i < 4; ++i) {
        tri.add(i, i, 2.0);
        if (i > 0)
            tri.add(i, i - 1, -1.0);
        if (i < 3)
            tri.add(i, i + 1, -1.0);
    }
    const auto x = solve_direct(SparseMatrix(4, tri), std::vector<double>(4, 1.0));
    const std::vector<double> expected{2.0, 3.0, 3.0, 2.0};
    CHECK(testing::max_abs_diff(x, expected) < 1e-13);

    std::mt19937 rng(42);
    for (int trial = 0; trial < 5; ++trial) {
        Dense d = random_dense(rng, 8);
        for (std::size_t i = 0; i < 8; ++i) {
            double s = 0.0;
            for (double v : d[i])
                s += std::abs(v);
            d[i][i] = s + 1.0;
        }
        const auto b = testing::random_vector(rng, 8);
        const auto oracle = testing::dense_solve(d, b);
        for (RowScaling rs : {RowScaling::None, RowScaling::MaxEntry}) {
            const DirectSolver lu(testing::to_sparse(d), rs);
            CHECK(testing::max_abs_diff(lu.solve(b), oracle) < 1e-12);
        }
    }

    TripletBuffer sing;
    sing.add(0, 0, 1.0);
    sing.add(1, 0, 1.0);
    CHECK_THROWS_AS(solve_direct(SparseMatrix(2, sing), std::vector<double>{1.0, 1.0}),
                    LinearAlgebraError);
}

TEST_CASE("row scaling survives rows spanning many decades") {
    // rows of size 1e-40 and 1e20 mixed; both scalings must solve it
    Dense d = {{1e-40, 2e-40, 0.0}, {1e20, 3e20, 1e20}, {0.0, 1.0, 4.0}};
    const std::vector<double> x{1.0, -2.0, 0.5};
    std::vector<double> b(3);
    for (std::size_t i = 0; i < 3; ++i)
        b[i] = testing::dot(d[i], x);
    const auto got = solve_direct(testing::to_sparse(d), b);
    CHECK(testing::max_abs_diff(got, x) < 1e-12);
}

TEST_CASE("smallest generalized eigenvalue") {
    TripletBuffer diag, id;
    const double vals[] = {3.0, 1.0, 2.0};
    for (std::size_t i = 0; i < 3; ++i) {
        diag.add(i, i, vals[i]);
        id.add(i, i, 1.0);
    }
    CHECK(min_generalized_eig_sym(SparseMatrix(3, diag), SparseMatrix(3, id)).value ==
          doctest::Approx(1.0).epsilon(1e-8));

    std::mt19937 rng(17);
    Dense skew(4, std::vector<double>(4, 0.0));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j) {
            skew[i][j] = std::uniform_real_distribution<double>(-1, 1)(rng);
            skew[j][i] = -skew[i][j];
        }
    TripletBuffer id4;
    for (std::size_t i = 0; i < 4; ++i)
        id4.add(i, i, 1.0);
    CHECK(std::abs(min_generalized_eig_sym(testing::to_sparse(skew), SparseMatrix(4, id4)).value) <
          1e-10);

    for (int trial = 0; trial < 5; ++trial) {
        Dense a = gram_plus_identity(random_dense(rng, 6));
        // shift so the spectrum straddles zero on some trials
        for (std::size_t i = 0; i < 6; ++i)
            a[i][i] -= 2.0 * trial;
        const Dense m = gram_plus_identity(random_dense(rng, 6));
        const double oracle = dense_min_generalized(a, m);
        const double got = min_generalized_eig_sym(testing::to_sparse(a), testing::to_sparse(m),
                                                   {2000, 1e-12})
                               .value;
        CHECK(std::abs(got - oracle) <= 1e-8 * std::max(1.0, std::abs(oracle)));

        Dense shifted = a;
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = i + 1; j < 6; ++j) {
                const double s = std::uniform_real_distribution<double>(-5, 5)(rng);
                shifted[i][j] += s;
                shifted[j][i] -= s;
            }
        const double again = min_generalized_eig_sym(testing::to_sparse(shifted),
                                                     testing::to_sparse(m), {2000, 1e-12})
                                 .value;
        CHECK(std::abs(again - got) <= 1e-8 * std::max(1.0, std::abs(got)));
    }
}

TEST_CASE("Dirichlet Laplacian eigenvalue approaches 2 pi^2") {
    const Mesh m(32);
    const DofMap dofs = interior_dofs(m);
    const double lam =
        min_generalized_eig_sym(assemble_stiffness(m, dofs), assemble_mass(m, dofs)).value;
    CHECK(std::abs(lam - 2.0 * M_PI * M_PI) < 0.05 * 2.0 * M_PI * M_PI);
}

}
