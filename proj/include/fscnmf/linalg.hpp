#ifndef FSCNMF_LINALG_HPP
#define FSCNMF_LINALG_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fscnmf/errors.hpp"

namespace fscnmf {

/// Row-major dense matrix of doubles. Houses the factor matrices and the
/// small k-by-k Gram systems; deliberately minimal.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return values_.size(); }

    double& operator()(std::size_t i, std::size_t j) {
        return values_[i * cols_ + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        return values_[i * cols_ + j];
    }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    DenseMatrix transposed() const {
        DenseMatrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    DenseMatrix& operator+=(const DenseMatrix& other);
    DenseMatrix& operator-=(const DenseMatrix& other);
    DenseMatrix& operator*=(double s);

    bool operator==(const DenseMatrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

/// Sparse matrix stored compressed-row. Duplicate (row,col) pairs passed to
/// the constructor are summed in encounter order; indices are validated and
/// values must be finite.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(std::size_t rows, std::size_t cols,
                 std::vector<Triplet> entries);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return values_.size(); }

    // CSR views. Column indices are sorted within each row.
    const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
    const std::vector<std::size_t>& col_idx() const { return col_idx_; }
    const std::vector<double>& values() const { return values_; }

    DenseMatrix densify() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

/// Dense product a*b. Fixed i-k-j accumulation order.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

/// Sparse-dense product s*d.
DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d);

/// Transposed sparse-dense product s^T*d, computed without materializing s^T.
DenseMatrix spmm_t(const SparseMatrix& s, const DenseMatrix& d);

/// Sparse-sparse product a*b (row expansion, dense scratch row).
SparseMatrix spmm_sparse(const SparseMatrix& a, const SparseMatrix& b);

/// wa*a + wb*b.
SparseMatrix sparse_add(const SparseMatrix& a, const SparseMatrix& b,
                        double wa = 1.0, double wb = 1.0);

SparseMatrix sparse_scale(const SparseMatrix& a, double factor);

/// Inverse of a small square matrix (k <= 512) by Gauss-Jordan elimination
/// with partial pivoting. Throws SingularMatrixError when a pivot falls
/// below 1e-12 in magnitude.
DenseMatrix inverse_small(const DenseMatrix& g);

double frobenius_sq(const DenseMatrix& x);
double frobenius_sq(const SparseMatrix& x);

struct SvdOptions {
    std::size_t max_iters = 200;
    double tol = 1e-8;  // max Ritz residual relative to the top eigenvalue
    bool fail_on_nonconvergence = true;
};

struct TruncatedSvd {
    DenseMatrix u;              // rows x k, orthonormal columns
    std::vector<double> sigma;  // k singular values, non-increasing
    DenseMatrix vt;             // k x cols, orthonormal rows
    std::size_t iterations = 0;
    double residual = 0.0;
};

/// Rank-k truncated SVD by seeded block subspace iteration on the smaller
/// Gram operator, with Rayleigh-Ritz extraction each sweep. Deterministic
/// for a fixed seed.
TruncatedSvd truncated_svd(const SparseMatrix& m, std::size_t k,
                           std::uint64_t seed, const SvdOptions& opts = {});

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues are returned in non-increasing order, vectors as columns.
struct SymmetricEig {
    std::vector<double> values;
    DenseMatrix vectors;
};
SymmetricEig jacobi_eigh(DenseMatrix s, std::size_t max_sweeps = 100);

// Text format: header line "rows<TAB>cols", then one "row<TAB>col<TAB>value"
// entry per line, 0-based indices.
SparseMatrix load_sparse_text(const std::string& path);
void save_sparse_text(const SparseMatrix& m, const std::string& path);

}  // namespace fscnmf

#endif
