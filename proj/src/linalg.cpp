#include "fscnmf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fscnmf/rng.hpp"

namespace fscnmf {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

std::string shape_str(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
    require(rows_ == other.rows_ && cols_ == other.cols_,
            "operator+=: shape mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i)
        values_[i] += other.values_[i];
    return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
    require(rows_ == other.rows_ && cols_ == other.cols_,
            "operator-=: shape mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i)
        values_[i] -= other.values_[i];
    return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols,
                           std::vector<Triplet> entries)
    : rows_(rows), cols_(cols) {
    for (const Triplet& t : entries) {
        if (t.row >= rows || t.col >= cols)
            throw ShapeError("sparse entry (" + std::to_string(t.row) + "," +
                             std::to_string(t.col) + ") outside " +
                             shape_str(rows, cols));
        if (!std::isfinite(t.value))
            throw ValidationError("sparse entry (" + std::to_string(t.row) +
                                  "," + std::to_string(t.col) +
                                  ") is not finite");
    }
    // Stable sort keeps duplicates in encounter order, so their sum is
    // deterministic for a given construction sequence.
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Triplet& a, const Triplet& b) {
                         return a.row != b.row ? a.row < b.row : a.col < b.col;
                     });
    row_ptr_.assign(rows + 1, 0);
    for (std::size_t i = 0; i < entries.size();) {
        std::size_t j = i + 1;
        double sum = entries[i].value;
        while (j < entries.size() && entries[j].row == entries[i].row &&
               entries[j].col == entries[i].col) {
            sum += entries[j].value;
            ++j;
        }
        col_idx_.push_back(entries[i].col);
        values_.push_back(sum);
        ++row_ptr_[entries[i].row + 1];
        i = j;
    }
    for (std::size_t r = 0; r < rows; ++r) row_ptr_[r + 1] += row_ptr_[r];
}

DenseMatrix SparseMatrix::densify() const {
    DenseMatrix d(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
            d(i, col_idx_[p]) += values_[p];
    return d;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols() == b.rows(), "matmul: " + shape_str(a.rows(), a.cols()) +
                                      " * " + shape_str(b.rows(), b.cols()));
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* out_row = out.data() + i * b.cols();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* b_row = b.data() + k * b.cols();
            for (std::size_t j = 0; j < b.cols(); ++j)
                out_row[j] += aik * b_row[j];
        }
    }
    return out;
}

DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d) {
    require(s.cols() == d.rows(), "spmm: " + shape_str(s.rows(), s.cols()) +
                                      " * " + shape_str(d.rows(), d.cols()));
    DenseMatrix out(s.rows(), d.cols());
    const auto& rp = s.row_ptr();
    const auto& ci = s.col_idx();
    const auto& v = s.values();
    for (std::size_t i = 0; i < s.rows(); ++i) {
        double* out_row = out.data() + i * d.cols();
        for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) {
            const double sv = v[p];
            const double* d_row = d.data() + ci[p] * d.cols();
            for (std::size_t j = 0; j < d.cols(); ++j)
                out_row[j] += sv * d_row[j];
        }
    }
    return out;
}

DenseMatrix spmm_t(const SparseMatrix& s, const DenseMatrix& d) {
    require(s.rows() == d.rows(), "spmm_t: " + shape_str(s.cols(), s.rows()) +
                                      " * " + shape_str(d.rows(), d.cols()));
    DenseMatrix out(s.cols(), d.cols());
    const auto& rp = s.row_ptr();
    const auto& ci = s.col_idx();
    const auto& v = s.values();
    for (std::size_t i = 0; i < s.rows(); ++i) {
        const double* d_row = d.data() + i * d.cols();
        for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) {
            double* out_row = out.data() + ci[p] * d.cols();
            const double sv = v[p];
            for (std::size_t j = 0; j < d.cols(); ++j)
                out_row[j] += sv * d_row[j];
        }
    }
    return out;
}

SparseMatrix spmm_sparse(const SparseMatrix& a, const SparseMatrix& b) {
    require(a.cols() == b.rows(),
            "spmm_sparse: " + shape_str(a.rows(), a.cols()) + " * " +
                shape_str(b.rows(), b.cols()));
    std::vector<Triplet> out;
    std::vector<double> acc(b.cols(), 0.0);
    std::vector<std::size_t> touched;
    const auto& arp = a.row_ptr();
    const auto& aci = a.col_idx();
    const auto& av = a.values();
    const auto& brp = b.row_ptr();
    const auto& bci = b.col_idx();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        touched.clear();
        for (std::size_t p = arp[i]; p < arp[i + 1]; ++p) {
            const std::size_t j = aci[p];
            const double aij = av[p];
            for (std::size_t q = brp[j]; q < brp[j + 1]; ++q) {
                if (acc[bci[q]] == 0.0 && bv[q] != 0.0)
                    touched.push_back(bci[q]);
                acc[bci[q]] += aij * bv[q];
            }
        }
        std::sort(touched.begin(), touched.end());
        for (std::size_t col : touched) {
            out.push_back({i, col, acc[col]});
            acc[col] = 0.0;
        }
    }
    return SparseMatrix(a.rows(), b.cols(), std::move(out));
}

SparseMatrix sparse_add(const SparseMatrix& a, const SparseMatrix& b,
                        double wa, double wb) {
    require(a.rows() == b.rows() && a.cols() == b.cols(),
            "sparse_add: shape mismatch");
    std::vector<Triplet> out;
    out.reserve(a.nnz() + b.nnz());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t p = a.row_ptr()[i]; p < a.row_ptr()[i + 1]; ++p)
            out.push_back({i, a.col_idx()[p], wa * a.values()[p]});
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t p = b.row_ptr()[i]; p < b.row_ptr()[i + 1]; ++p)
            out.push_back({i, b.col_idx()[p], wb * b.values()[p]});
    return SparseMatrix(a.rows(), a.cols(), std::move(out));
}

SparseMatrix sparse_scale(const SparseMatrix& a, double factor) {
    std::vector<Triplet> out;
    out.reserve(a.nnz());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t p = a.row_ptr()[i]; p < a.row_ptr()[i + 1]; ++p)
            out.push_back({i, a.col_idx()[p], factor * a.values()[p]});
    return SparseMatrix(a.rows(), a.cols(), std::move(out));
}

DenseMatrix inverse_small(const DenseMatrix& g) {
    require(g.rows() == g.cols(), "inverse_small: matrix not square");
    if (g.rows() > 512)
        throw ShapeError("inverse_small: limited to order 512, got " +
                         std::to_string(g.rows()));
    const std::size_t n = g.rows();
    DenseMatrix a = g;
    DenseMatrix inv = DenseMatrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        if (std::abs(a(pivot, col)) < 1e-12)
            throw SingularMatrixError(
                "inverse_small: pivot below 1e-12 at column " +
                std::to_string(col));
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a(pivot, j), a(col, j));
                std::swap(inv(pivot, j), inv(col, j));
            }
        }
        const double d = a(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            a(col, j) /= d;
            inv(col, j) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a(r, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a(r, j) -= f * a(col, j);
                inv(r, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

double frobenius_sq(const DenseMatrix& x) {
    double sum = 0.0;
    for (double v : x.values()) sum += v * v;
    return sum;
}

double frobenius_sq(const SparseMatrix& x) {
    double sum = 0.0;
    for (double v : x.values()) sum += v * v;
    return sum;
}

SymmetricEig jacobi_eigh(DenseMatrix s, std::size_t max_sweeps) {
    require(s.rows() == s.cols(), "jacobi_eigh: matrix not square");
    const std::size_t n = s.rows();
    DenseMatrix e = DenseMatrix::identity(n);
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
        double diag = 0.0;
        for (std::size_t p = 0; p < n; ++p) diag += s(p, p) * s(p, p);
        if (off <= 1e-30 * (diag + off) || off == 0.0) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = s(p, q);
                if (apq == 0.0) continue;
                const double app = s(p, p);
                const double aqq = s(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) +
                                  std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double snv = t * c;
                for (std::size_t j = 0; j < n; ++j) {
                    const double sp = s(p, j);
                    const double sq = s(q, j);
                    s(p, j) = c * sp - snv * sq;
                    s(q, j) = snv * sp + c * sq;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    const double sp = s(j, p);
                    const double sq = s(j, q);
                    s(j, p) = c * sp - snv * sq;
                    s(j, q) = snv * sp + c * sq;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    const double ep = e(j, p);
                    const double eq = e(j, q);
                    e(j, p) = c * ep - snv * eq;
                    e(j, q) = snv * ep + c * eq;
                }
            }
        }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                     std::size_t b) {
        return s(a, a) > s(b, b);
    });
    SymmetricEig out;
    out.values.resize(n);
    out.vectors = DenseMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = s(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i)
            out.vectors(i, j) = e(i, order[j]);
    }
    return out;
}

namespace {

// Modified Gram-Schmidt on the columns of q. Columns that collapse (norm
// below 1e-300 after projection) are replaced by the first canonical basis
// vector that keeps the set independent, so the basis always has full rank.
void orthonormalize_columns(DenseMatrix& q) {
    const std::size_t n = q.rows();
    const std::size_t k = q.cols();
    std::size_t fallback = 0;
    for (std::size_t j = 0; j < k; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t prev = 0; prev < j; ++prev) {
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    dot += q(i, prev) * q(i, j);
                for (std::size_t i = 0; i < n; ++i)
                    q(i, j) -= dot * q(i, prev);
            }
        }
        double norm_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm_sq += q(i, j) * q(i, j);
        if (norm_sq > 1e-300) {
            const double inv = 1.0 / std::sqrt(norm_sq);
            for (std::size_t i = 0; i < n; ++i) q(i, j) *= inv;
            continue;
        }
        // Degenerate column: substitute a canonical vector and retry.
        bool replaced = false;
        while (fallback < n && !replaced) {
            for (std::size_t i = 0; i < n; ++i) q(i, j) = 0.0;
            q(fallback, j) = 1.0;
            ++fallback;
            for (std::size_t prev = 0; prev < j; ++prev) {
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    dot += q(i, prev) * q(i, j);
                for (std::size_t i = 0; i < n; ++i)
                    q(i, j) -= dot * q(i, prev);
            }
            double ns = 0.0;
            for (std::size_t i = 0; i < n; ++i) ns += q(i, j) * q(i, j);
            if (ns > 1e-8) {
                const double inv = 1.0 / std::sqrt(ns);
                for (std::size_t i = 0; i < n; ++i) q(i, j) *= inv;
                replaced = true;
            }
        }
        if (!replaced)
            throw ConvergenceError(
                "orthonormalize_columns: could not complete basis", 0.0);
    }
}

}  // namespace

TruncatedSvd truncated_svd(const SparseMatrix& m, std::size_t k,
                           std::uint64_t seed, const SvdOptions& opts) {
    if (k < 1 || k > std::min(m.rows(), m.cols()))
        throw ShapeError("truncated_svd: k=" + std::to_string(k) +
                         " out of range for " +
                         shape_str(m.rows(), m.cols()));
    // Iterate on the smaller Gram operator: G = m^T m when cols <= rows,
    // otherwise G = m m^T.
    const bool right_side = m.cols() <= m.rows();
    const std::size_t dim = right_side ? m.cols() : m.rows();

    Rng rng(seed);
    DenseMatrix q(dim, k);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < k; ++j) q(i, j) = rng.uniform(-1.0, 1.0);
    orthonormalize_columns(q);

    auto apply_gram = [&](const DenseMatrix& x) {
        return right_side ? spmm_t(m, spmm(m, x)) : spmm(m, spmm_t(m, x));
    };

    std::vector<double> eigvals(k, 0.0);
    double residual = 0.0;
    std::size_t iters = 0;
    bool converged = false;
    for (std::size_t sweep = 0; sweep < opts.max_iters; ++sweep) {
        ++iters;
        DenseMatrix z = apply_gram(q);
        // Rayleigh-Ritz on the current subspace.
        DenseMatrix small(k, k);
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) {
                double dot = 0.0;
                for (std::size_t i = 0; i < dim; ++i)
                    dot += q(i, a) * z(i, b);
                small(a, b) = dot;
            }
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a + 1; b < k; ++b) {
                const double sym = 0.5 * (small(a, b) + small(b, a));
                small(a, b) = sym;
                small(b, a) = sym;
            }
        SymmetricEig ritz = jacobi_eigh(small);
        DenseMatrix w = matmul(q, ritz.vectors);   // Ritz vectors
        DenseMatrix gw = matmul(z, ritz.vectors);  // G * Ritz vectors
        const double top = std::max(ritz.values[0], 1e-300);
        double worst = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            double err_sq = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                const double r = gw(i, j) - ritz.values[j] * w(i, j);
                err_sq += r * r;
            }
            worst = std::max(worst, std::sqrt(err_sq) / top);
        }
        residual = worst;
        eigvals = ritz.values;
        if (residual <= opts.tol) {
            q = w;
            converged = true;
            break;
        }
        q = gw;  // next subspace = G * (sorted Ritz basis)
        orthonormalize_columns(q);
    }
    if (!converged && opts.fail_on_nonconvergence)
        throw ConvergenceError(
            "truncated_svd: residual " + std::to_string(residual) + " after " +
                std::to_string(iters) + " sweeps (tol " +
                std::to_string(opts.tol) + ")",
            residual);
    if (!converged) {
        // Best-effort: rotate onto the last Ritz basis.
        DenseMatrix z = apply_gram(q);
        DenseMatrix small(k, k);
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) {
                double dot = 0.0;
                for (std::size_t i = 0; i < dim; ++i)
                    dot += q(i, a) * z(i, b);
                small(a, b) = dot;
            }
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a + 1; b < k; ++b) {
                const double sym = 0.5 * (small(a, b) + small(b, a));
                small(a, b) = sym;
                small(b, a) = sym;
            }
        SymmetricEig ritz = jacobi_eigh(small);
        q = matmul(q, ritz.vectors);
        eigvals = ritz.values;
    }

    TruncatedSvd out;
    out.iterations = iters;
    out.residual = residual;
    out.sigma.resize(k);
    for (std::size_t j = 0; j < k; ++j)
        out.sigma[j] = std::sqrt(std::max(eigvals[j], 0.0));

    // Recover the other side; near-zero singular values get a deterministic
    // orthonormal completion instead of a division blow-up.
    const std::size_t other_dim = right_side ? m.rows() : m.cols();
    DenseMatrix side = q;                       // dim x k
    DenseMatrix other(other_dim, k);
    const double sigma_floor = out.sigma[0] * 1e-13;
    DenseMatrix mapped = right_side ? spmm(m, side) : spmm_t(m, side);
    std::size_t fallback = 0;
    for (std::size_t j = 0; j < k; ++j) {
        if (out.sigma[j] > sigma_floor && out.sigma[j] > 0.0) {
            const double inv = 1.0 / out.sigma[j];
            for (std::size_t i = 0; i < other_dim; ++i)
                other(i, j) = mapped(i, j) * inv;
        } else {
            out.sigma[j] = 0.0;
            bool placed = false;
            while (fallback < other_dim && !placed) {
                for (std::size_t i = 0; i < other_dim; ++i) other(i, j) = 0.0;
                other(fallback, j) = 1.0;
                ++fallback;
                for (std::size_t prev = 0; prev < j; ++prev) {
                    double dot = 0.0;
                    for (std::size_t i = 0; i < other_dim; ++i)
                        dot += other(i, prev) * other(i, j);
                    for (std::size_t i = 0; i < other_dim; ++i)
                        other(i, j) -= dot * other(i, prev);
                }
                double ns = 0.0;
                for (std::size_t i = 0; i < other_dim; ++i)
                    ns += other(i, j) * other(i, j);
                if (ns > 1e-8) {
                    const double inv = 1.0 / std::sqrt(ns);
                    for (std::size_t i = 0; i < other_dim; ++i)
                        other(i, j) *= inv;
                    placed = true;
                }
            }
        }
    }
    if (right_side) {
        out.u = other;
        out.vt = side.transposed();
    } else {
        out.u = side;
        out.vt = other.transposed();
    }
    return out;
}

SparseMatrix load_sparse_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    std::size_t rows = 0, cols = 0;
    bool have_header = false;
    std::vector<Triplet> entries;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        if (!have_header) {
            long long r, c;
            if (!(ss >> r >> c) || r < 0 || c < 0)
                throw ParseError(path + ":" + std::to_string(lineno) +
                                 ": bad header, expected rows<TAB>cols");
            rows = static_cast<std::size_t>(r);
            cols = static_cast<std::size_t>(c);
            have_header = true;
            continue;
        }
        long long r, c;
        double v;
        if (!(ss >> r >> c >> v) || r < 0 || c < 0)
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": bad entry, expected row<TAB>col<TAB>value");
        entries.push_back({static_cast<std::size_t>(r),
                           static_cast<std::size_t>(c), v});
    }
    if (!have_header) throw ParseError(path + ": missing header line");
    return SparseMatrix(rows, cols, std::move(entries));
}

void save_sparse_text(const SparseMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << m.rows() << '\t' << m.cols() << '\n';
    char buf[64];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t p = m.row_ptr()[i]; p < m.row_ptr()[i + 1]; ++p) {
            std::snprintf(buf, sizeof buf, "%.17g", m.values()[p]);
            out << i << '\t' << m.col_idx()[p] << '\t' << buf << '\n';
        }
    }
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace fscnmf
