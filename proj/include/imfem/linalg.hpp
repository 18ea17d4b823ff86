#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace imfem {

class LinearAlgebraError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

/// Accumulates (row, col, value) contributions; duplicates are summed when
/// the matrix is compressed.
class TripletBuffer {
public:
    void add(std::size_t row, std::size_t col, double value) { entries_.push_back({row, col, value}); }
    void reserve(std::size_t n) { entries_.reserve(n); }
    /// Appends another buffer, e.g. one filled by a different thread.
    void merge(TripletBuffer&& other);
    std::span<const Triplet> entries() const { return entries_; }

private:
    std::vector<Triplet> entries_;
};

/// Square matrix in compressed row storage with sorted, unique column indices.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(std::size_t dimension, const TripletBuffer& triplets);

    std::size_t dimension() const { return dim_; }
    std::size_t nonzeros() const { return values_.size(); }
    std::span<const std::size_t> row_offsets() const { return row_ptr_; }
    std::span<const std::size_t> column_indices() const { return cols_; }
    std::span<const double> values() const { return values_; }

    /// Entry (row, col), zero when not stored.
    double at(std::size_t row, std::size_t col) const;

    std::vector<double> multiply(std::span<const double> x) const;
    double quadratic_form(std::span<const double> x) const;

    SparseMatrix transpose() const;
    /// (A + A^T) / 2
    SparseMatrix symmetric_part() const;
    /// alpha * this + beta * other
    SparseMatrix combine(double alpha, const SparseMatrix& other, double beta) const;

private:
    std::size_t dim_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> cols_;
    std::vector<double> values_;
};

/// Whether rows are divided by their largest entry before factoring.
enum class RowScaling { None, MaxEntry };

/// Sparse LU with partial pivoting, factored once and reusable for many
/// right-hand sides.
class DirectSolver {
public:
    explicit DirectSolver(const SparseMatrix& a, RowScaling scaling = RowScaling::MaxEntry);
    ~DirectSolver();
    DirectSolver(DirectSolver&&) noexcept;
    DirectSolver& operator=(DirectSolver&&) noexcept;

    std::vector<double> solve(std::span<const double> rhs) const;
    std::size_t dimension() const { return dim_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::size_t dim_;
};

/// Throws LinearAlgebraError for a numerically singular matrix.
std::vector<double> solve_direct(const SparseMatrix& a, std::span<const double> rhs,
                                 RowScaling scaling = RowScaling::MaxEntry);

struct EigenOptions {
    int max_iterations = 500;
    double relative_tolerance = 1e-6;
};

struct EigenEstimate {
    double value;
    int iterations;
};

/// Smallest lambda with ((A + A^T)/2) x = lambda M x, M symmetric positive
/// definite. Shift-and-invert inverse iteration, the shift kept below the
/// spectrum (checked through the inertia of the shifted LDL^T factor).
EigenEstimate min_generalized_eig_sym(const SparseMatrix& a, const SparseMatrix& m,
                                      const EigenOptions& opts = {});

} // namespace imfem
