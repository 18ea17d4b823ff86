#include "imfem/linalg.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace imfem {

using EigenSparse = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

namespace {

EigenSparse to_eigen(const SparseMatrix& a) {
    std::vector<Eigen::Triplet<double, int>> t;
    t.reserve(a.nonzeros());
    const auto rp = a.row_offsets();
    const auto ci = a.column_indices();
    const auto v = a.values();
    for (std::size_t r = 0; r < a.dimension(); ++r)
        for (std::size_t p = rp[r]; p < rp[r + 1]; ++p)
            t.emplace_back(static_cast<int>(r), static_cast<int>(ci[p]), v[p]);
    const auto n = static_cast<Eigen::Index>(a.dimension());
    EigenSparse out(n, n);
    out.setFromTriplets(t.begin(), t.end());
    out.makeCompressed();
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

} // namespace

void TripletBuffer::merge(TripletBuffer&& other) {
    if (entries_.empty()) {
        entries_ = std::move(other.entries_);
        return;
    }
    entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
    other.entries_.clear();
}

SparseMatrix::SparseMatrix(std::size_t dimension, const TripletBuffer& triplets) : dim_(dimension) {
    const auto entries = triplets.entries();
    std::vector<std::size_t> count(dim_ + 1, 0);
    for (const auto& t : entries) {
        if (t.row >= dim_ || t.col >= dim_)
            throw std::out_of_range("triplet (" + std::to_string(t.row) + ", " +
                                    std::to_string(t.col) + ") outside a " +
                                    std::to_string(dim_) + "x" + std::to_string(dim_) + " matrix");
        ++count[t.row + 1];
    }
    std::partial_sum(count.begin(), count.end(), count.begin());

    // bucket by row, then sort and sum duplicates within each row
    std::vector<std::size_t> cols(entries.size());
    std::vector<double> vals(entries.size());
    std::vector<std::size_t> fill(count.begin(), count.end() - 1);
    for (const auto& t : entries) {
        const std::size_t p = fill[t.row]++;
        cols[p] = t.col;
        vals[p] = t.value;
    }

    row_ptr_.assign(dim_ + 1, 0);
    cols_.reserve(entries.size());
    values_.reserve(entries.size());
    std::vector<std::size_t> order;
    for (std::size_t r = 0; r < dim_; ++r) {
        order.resize(count[r + 1] - count[r]);
        std::iota(order.begin(), order.end(), count[r]);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return cols[a] < cols[b]; });
        for (std::size_t p : order) {
            if (cols_.size() > row_ptr_[r] && cols_.back() == cols[p])
                values_.back() += vals[p];
            else {
                cols_.push_back(cols[p]);
                values_.push_back(vals[p]);
            }
        }
        row_ptr_[r + 1] = cols_.size();
    }
}

double SparseMatrix::at(std::size_t row, std::size_t col) const {
    const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row]);
    const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row + 1]);
    const auto it = std::lower_bound(first, last, col);
    if (it == last || *it != col)
        return 0.0;
    return values_[static_cast<std::size_t>(it - cols_.begin())];
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
    if (x.size() != dim_)
        throw std::invalid_argument("vector size does not match matrix dimension");
    std::vector<double> y(dim_, 0.0);
    for (std::size_t r = 0; r < dim_; ++r) {
        double s = 0.0;
        for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p)
            s += values_[p] * x[cols_[p]];
        y[r] = s;
    }
    return y;
}

double SparseMatrix::quadratic_form(std::span<const double> x) const {
    const auto y = multiply(x);
    return dot(x, y);
}

SparseMatrix SparseMatrix::transpose() const {
    TripletBuffer t;
    t.reserve(values_.size());
    for (std::size_t r = 0; r < dim_; ++r)
        for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p)
            t.add(cols_[p], r, values_[p]);
    return {dim_, t};
}

SparseMatrix SparseMatrix::combine(double alpha, const SparseMatrix& other, double beta) const {
    if (other.dim_ != dim_)
        throw std::invalid_argument("cannot combine matrices of different dimensions");
    TripletBuffer t;
    t.reserve(values_.size() + other.values_.size());
    for (std::size_t r = 0; r < dim_; ++r) {
        for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p)
            t.add(r, cols_[p], alpha * values_[p]);
        for (std::size_t p = other.row_ptr_[r]; p < other.row_ptr_[r + 1]; ++p)
            t.add(r, other.cols_[p], beta * other.values_[p]);
    }
    return {dim_, t};
}

SparseMatrix SparseMatrix::symmetric_part() const {
    return combine(0.5, transpose(), 0.5);
}

struct DirectSolver::Impl {
    Eigen::SparseLU<EigenSparse, Eigen::COLAMDOrdering<int>> lu;
    Eigen::VectorXd row_scale;
};

DirectSolver::DirectSolver(const SparseMatrix& a, RowScaling scaling)
    : impl_(std::make_unique<Impl>()), dim_(a.dimension()) {
    if (dim_ == 0)
        return;
    // Systems weighted by an invariant measure have rows spanning dozens of
    // decades, and unscaled partial pivoting loses the small ones. The
    // invariant-measure systems themselves are better left alone: scaling
    // them turns the far tail of the solution into sign-changing noise.
    EigenSparse m = to_eigen(a);
    impl_->row_scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim_));
    if (scaling == RowScaling::MaxEntry) {
        impl_->row_scale.setZero();
        for (Eigen::Index c = 0; c < m.outerSize(); ++c)
            for (EigenSparse::InnerIterator it(m, c); it; ++it)
                impl_->row_scale[it.row()] =
                    std::max(impl_->row_scale[it.row()], std::abs(it.value()));
        for (Eigen::Index r = 0; r < impl_->row_scale.size(); ++r) {
            if (!(impl_->row_scale[r] > 0.0))
                throw LinearAlgebraError("sparse LU: row " + std::to_string(r) + " is zero");
            impl_->row_scale[r] = 1.0 / impl_->row_scale[r];
        }
        m = impl_->row_scale.asDiagonal() * m;
    }
    impl_->lu.analyzePattern(m);
    impl_->lu.factorize(m);
    if (impl_->lu.info() != Eigen::Success)
        throw LinearAlgebraError("sparse LU failed: " + impl_->lu.lastErrorMessage());
    // SparseLU stops on exactly zero pivots only; reject tiny ones as well
    if (!(impl_->lu.logAbsDeterminant() > -std::numeric_limits<double>::infinity()))
        throw LinearAlgebraError("sparse LU: matrix is numerically singular");
}

DirectSolver::~DirectSolver() = default;
DirectSolver::DirectSolver(DirectSolver&&) noexcept = default;
DirectSolver& DirectSolver::operator=(DirectSolver&&) noexcept = default;

std::vector<double> DirectSolver::solve(std::span<const double> rhs) const {
    if (rhs.size() != dim_)
        throw std::invalid_argument("right-hand side size does not match matrix dimension");
    std::vector<double> x(dim_);
    if (dim_ == 0)
        return x;
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(dim_));
    Eigen::Map<Eigen::VectorXd> out(x.data(), static_cast<Eigen::Index>(dim_));
    out = impl_->lu.solve(impl_->row_scale.cwiseProduct(b));
    if (impl_->lu.info() != Eigen::Success || !out.allFinite())
        throw LinearAlgebraError("sparse LU solve produced non-finite values");
    return x;
}

std::vector<double> solve_direct(const SparseMatrix& a, std::span<const double> rhs,
                                 RowScaling scaling) {
    return DirectSolver(a, scaling).solve(rhs);
}

namespace {

struct ShiftedFactor {
    Eigen::SimplicialLDLT<EigenSparse, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
    bool positive_definite = false;
};

void factor_shifted(ShiftedFactor& f, const EigenSparse& s, const EigenSparse& m, double shift) {
    const EigenSparse shifted = s - shift * m;
    f.ldlt.compute(shifted);
    f.positive_definite = f.ldlt.info() == Eigen::Success && (f.ldlt.vectorD().array() > 0.0).all();
}

} // namespace

EigenEstimate min_generalized_eig_sym(const SparseMatrix& a, const SparseMatrix& m,
                                      const EigenOptions& opts) {
    if (a.dimension() != m.dimension())
        throw std::invalid_argument("eigenproblem matrices differ in dimension");
    const std::size_t n = a.dimension();
    if (n == 0)
        throw std::invalid_argument("empty eigenproblem");

    const SparseMatrix sym = a.symmetric_part();
    const EigenSparse s = to_eigen(sym);
    const EigenSparse me = to_eigen(m);

    // Gershgorin lower bound of the symmetric part and the smallest diagonal of M
    double gersh = std::numeric_limits<double>::infinity();
    double scale = 0.0;
    double mdiag_min = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < n; ++r) {
        double diag = 0.0, off = 0.0;
        const auto rp = sym.row_offsets();
        for (std::size_t p = rp[r]; p < rp[r + 1]; ++p) {
            if (sym.column_indices()[p] == r)
                diag = sym.values()[p];
            else
                off += std::abs(sym.values()[p]);
        }
        gersh = std::min(gersh, diag - off);
        scale = std::max(scale, std::abs(diag) + off);
        const double md = m.at(r, r);
        if (!(md > 0.0))
            throw std::invalid_argument("mass matrix must have a positive diagonal");
        mdiag_min = std::min(mdiag_min, md);
    }
    scale /= mdiag_min;
    const double floor = std::max(scale, 1.0) * 1e-12;

    double shift = std::min(gersh, 0.0) / mdiag_min - std::max(1e-3 * scale, floor);
    auto f = std::make_unique<ShiftedFactor>();
    factor_shifted(*f, s, me, shift);
    for (int tries = 0; !f->positive_definite; ++tries) {
        if (tries == 60)
            throw LinearAlgebraError("could not find a shift below the spectrum");
        shift -= 2.0 * (std::abs(shift) + floor);
        factor_shifted(*f, s, me, shift);
    }

    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x[i] = 1.0 + 0.5 * std::sin(1.7 * static_cast<double>(i));
    x /= std::sqrt(x.dot(me * x));

    double lambda = x.dot(s * x);
    double margin = 1e-3;
    for (int it = 1; it <= opts.max_iterations; ++it) {
        Eigen::VectorXd y = f->ldlt.solve(me * x);
        const double ynorm = std::sqrt(y.dot(me * y));
        if (!(ynorm > 0.0) || !std::isfinite(ynorm))
            throw LinearAlgebraError("inverse iteration broke down");
        x = y / ynorm;
        const double prev = lambda;
        lambda = x.dot(s * x);

        const double width = std::max(margin * std::max(std::abs(lambda), floor), floor);
        const bool shift_close = lambda - shift <= 20.0 * width;
        if (it > 1 && shift_close &&
            std::abs(lambda - prev) <= opts.relative_tolerance * std::max(std::abs(lambda), floor))
            return {lambda, it};

        if (!shift_close && std::abs(lambda - prev) <= 0.1 * (lambda - shift)) {
            auto trial = std::make_unique<ShiftedFactor>();
            factor_shifted(*trial, s, me, lambda - width);
            if (trial->positive_definite) {
                f = std::move(trial);
                shift = lambda - width;
            } else {
                margin = std::min(margin * 10.0, 0.5);
            }
        }
    }
    throw LinearAlgebraError("inverse iteration did not converge in " +
                             std::to_string(opts.max_iterations) + " iterations");
}

} // namespace imfem
