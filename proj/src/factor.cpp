#include "fscnmf/factor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fscnmf/rng.hpp"

namespace fscnmf {

namespace {

constexpr double kDenomEps = 1e-12;

void require_shape(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

// ||S - X Y||_F^2 without forming X Y, via
// ||S||^2 - 2 <S, XY> + <X^T X, Y Y^T>. Linear in nnz(S) and in the outer
// dimensions, which is what keeps the whole solver linear in n.
double fit_term_sq(const SparseMatrix& s, const DenseMatrix& x,
                   const DenseMatrix& y) {
    require_shape(x.rows() == s.rows() && y.cols() == s.cols() &&
                      x.cols() == y.rows(),
                  "fit_term_sq: inconsistent shapes");
    const std::size_t k = x.cols();
    double total = frobenius_sq(s);

    const auto& rp = s.row_ptr();
    const auto& ci = s.col_idx();
    const auto& sv = s.values();
    double cross = 0.0;
    for (std::size_t i = 0; i < s.rows(); ++i) {
        const double* x_row = x.data() + i * k;
        for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) {
            const std::size_t j = ci[p];
            double dot = 0.0;
            for (std::size_t a = 0; a < k; ++a) dot += x_row[a] * y(a, j);
            cross += sv[p] * dot;
        }
    }
    total -= 2.0 * cross;

    DenseMatrix xtx = matmul(x.transposed(), x);   // k x k
    DenseMatrix yyt = matmul(y, y.transposed());   // k x k
    double gram = 0.0;
    for (std::size_t a = 0; a < k * k; ++a)
        gram += xtx.data()[a] * yyt.data()[a];
    return total + gram;
}

double diff_sq(const DenseMatrix& a, const DenseMatrix& b) {
    require_shape(a.rows() == b.rows() && a.cols() == b.cols(),
                  "diff_sq: shape mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        sum += d * d;
    }
    return sum;
}

DenseMatrix clip_nonnegative(DenseMatrix m, bool* clipped) {
    bool any = false;
    for (double& v : m.values()) {
        if (v < 0.0) {
            v = 0.0;
            any = true;
        } else if (v == 0.0) {
            v = 0.0;  // normalize -0.0
        }
    }
    if (clipped) *clipped = any;
    return m;
}

DenseMatrix ridge_gram(const DenseMatrix& half, double ridge) {
    DenseMatrix g = matmul(half, half.transposed());
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += ridge;
    return g;
}

// factor' = factor .* ratio, with exact zeros staying exact zeros.
DenseMatrix apply_ratio(const DenseMatrix& factor, const DenseMatrix& ratio) {
    DenseMatrix out(factor.rows(), factor.cols());
    for (std::size_t i = 0; i < factor.size(); ++i) {
        const double f = factor.data()[i];
        out.data()[i] = f == 0.0 ? 0.0 : f * ratio.data()[i];
    }
    return out;
}

// U <- U + alpha (U .* P - U); for alpha in (0,1] this is a convex blend of
// two non-negative points. alpha = 1 is exactly the plain multiplicative
// step, bit for bit.
DenseMatrix damped_step(const DenseMatrix& factor, const DenseMatrix& ratio,
                        double alpha) {
    DenseMatrix target = apply_ratio(factor, ratio);
    if (alpha == 1.0) return target;
    DenseMatrix out(factor.rows(), factor.cols());
    for (std::size_t i = 0; i < factor.size(); ++i)
        out.data()[i] = factor.data()[i] +
                        alpha * (target.data()[i] - factor.data()[i]);
    return clip_nonnegative(std::move(out), nullptr);
}

}  // namespace

Variant variant_from_string(const std::string& s) {
    if (s == "als") return Variant::als;
    if (s == "mult") return Variant::multiplicative;
    if (s == "mult-l1") return Variant::multiplicative_l1;
    throw ParamError("unknown variant '" + s +
                     "' (expected als, mult, or mult-l1)");
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::als: return "als";
        case Variant::multiplicative: return "mult";
        case Variant::multiplicative_l1: return "mult-l1";
    }
    return "als";
}

InitMethod init_from_string(const std::string& s) {
    if (s == "nndsvd") return InitMethod::nndsvd;
    if (s == "random") return InitMethod::random_uniform;
    throw ParamError("unknown init '" + s + "' (expected nndsvd or random)");
}

std::string to_string(InitMethod m) {
    return m == InitMethod::nndsvd ? "nndsvd" : "random";
}

const char* to_string(Phase p) {
    switch (p) {
        case Phase::init: return "init";
        case Phase::structure: return "structure";
        case Phase::content: return "content";
    }
    return "init";
}

void Hyperparams::validate(std::size_t n, std::size_t d) const {
    auto nonneg = [](double w, const char* name) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw ParamError(std::string(name) + " must be >= 0");
    };
    nonneg(alpha1, "alpha1");
    nonneg(alpha2, "alpha2");
    nonneg(alpha3, "alpha3");
    nonneg(beta1, "beta1");
    nonneg(beta2, "beta2");
    nonneg(beta3, "beta3");
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw ParamError("gamma must lie in [0,1]");
    if (k < 1) throw ParamError("k must be >= 1");
    if (k >= std::min(n, d))
        throw ParamError("k=" + std::to_string(k) +
                         " must be < min(n,d)=" +
                         std::to_string(std::min(n, d)));
    if (m_order < 1) throw ParamError("order must be >= 1");
    if (inner_iters < 1) throw ParamError("inner iterations must be >= 1");
    if (max_outer < 1) throw ParamError("max outer iterations must be >= 1");
    if (!(rel_tol >= 0.0)) throw ParamError("tol must be >= 0");
}

double cost_d1(const SparseMatrix& m, const FactorState& s,
               const Hyperparams& hp) {
    return fit_term_sq(m, s.b1, s.b2) + hp.alpha1 * diff_sq(s.b1, s.u) +
           hp.alpha2 * frobenius_sq(s.b1) + hp.alpha3 * frobenius_sq(s.b2);
}

double cost_d2(const SparseMatrix& c, const FactorState& s,
               const Hyperparams& hp) {
    return fit_term_sq(c, s.u, s.v) + hp.beta1 * diff_sq(s.u, s.b1) +
           hp.beta2 * frobenius_sq(s.u) + hp.beta3 * frobenius_sq(s.v);
}

DenseMatrix update_b1_als(const SparseMatrix& m, const DenseMatrix& b2,
                          const DenseMatrix& u, double alpha1, double alpha2,
                          bool* clipped) {
    require_shape(m.cols() == b2.cols() && u.rows() == m.rows() &&
                      u.cols() == b2.rows(),
                  "update_b1_als: inconsistent shapes");
    DenseMatrix num = spmm(m, b2.transposed());  // M B2^T, n x k
    const double a1 = alpha1;
    for (std::size_t i = 0; i < num.size(); ++i)
        num.data()[i] += a1 * u.data()[i];
    DenseMatrix ginv = inverse_small(ridge_gram(b2, alpha1 + alpha2));
    return clip_nonnegative(matmul(num, ginv), clipped);
}

DenseMatrix update_b2_als(const SparseMatrix& m, const DenseMatrix& b1,
                          double alpha3, bool* clipped) {
    require_shape(m.rows() == b1.rows(), "update_b2_als: shapes");
    DenseMatrix bt_m = spmm_t(m, b1).transposed();  // B1^T M, k x n
    DenseMatrix g = matmul(b1.transposed(), b1);
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += alpha3;
    return clip_nonnegative(matmul(inverse_small(g), bt_m), clipped);
}

DenseMatrix update_u_als(const SparseMatrix& c, const DenseMatrix& v,
                         const DenseMatrix& b1, double beta1, double beta2,
                         bool* clipped) {
    require_shape(c.cols() == v.cols() && b1.rows() == c.rows() &&
                      b1.cols() == v.rows(),
                  "update_u_als: inconsistent shapes");
    DenseMatrix num = spmm(c, v.transposed());  // C V^T, n x k
    for (std::size_t i = 0; i < num.size(); ++i)
        num.data()[i] += beta1 * b1.data()[i];
    DenseMatrix ginv = inverse_small(ridge_gram(v, beta1 + beta2));
    return clip_nonnegative(matmul(num, ginv), clipped);
}

DenseMatrix update_v_als(const SparseMatrix& c, const DenseMatrix& u,
                         double beta3, bool* clipped) {
    require_shape(c.rows() == u.rows(), "update_v_als: shapes");
    DenseMatrix ut_c = spmm_t(c, u).transposed();  // U^T C, k x d
    DenseMatrix g = matmul(u.transposed(), u);
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += beta3;
    return clip_nonnegative(matmul(inverse_small(g), ut_c), clipped);
}

DenseMatrix multiplicative_ratio_u(const SparseMatrix& c, const DenseMatrix& u,
                                   const DenseMatrix& v, const DenseMatrix& b1,
                                   double beta1, double beta2) {
    require_shape(c.rows() == u.rows() && c.cols() == v.cols() &&
                      u.cols() == v.rows() && b1.rows() == u.rows() &&
                      b1.cols() == u.cols(),
                  "multiplicative_ratio_u: inconsistent shapes");
    DenseMatrix num = spmm(c, v.transposed());  // C V^T + beta1 B1
    for (std::size_t i = 0; i < num.size(); ++i)
        num.data()[i] += beta1 * b1.data()[i];
    DenseMatrix den = matmul(u, matmul(v, v.transposed()));
    const double ridge = beta1 + beta2;
    for (std::size_t i = 0; i < den.size(); ++i)
        den.data()[i] += ridge * u.data()[i];
    DenseMatrix ratio(u.rows(), u.cols());
    for (std::size_t i = 0; i < ratio.size(); ++i)
        ratio.data()[i] = num.data()[i] / (den.data()[i] + kDenomEps);
    return ratio;
}

DenseMatrix multiplicative_ratio_b1(const SparseMatrix& m,
                                    const DenseMatrix& b1,
                                    const DenseMatrix& b2,
                                    const DenseMatrix& u, double alpha1,
                                    double alpha2) {
    require_shape(m.rows() == b1.rows() && m.cols() == b2.cols() &&
                      b1.cols() == b2.rows() && u.rows() == b1.rows() &&
                      u.cols() == b1.cols(),
                  "multiplicative_ratio_b1: inconsistent shapes");
    DenseMatrix num = spmm(m, b2.transposed());
    for (std::size_t i = 0; i < num.size(); ++i)
        num.data()[i] += alpha1 * u.data()[i];
    DenseMatrix den = matmul(b1, matmul(b2, b2.transposed()));
    const double ridge = alpha1 + alpha2;
    for (std::size_t i = 0; i < den.size(); ++i)
        den.data()[i] += ridge * b1.data()[i];
    DenseMatrix ratio(b1.rows(), b1.cols());
    for (std::size_t i = 0; i < ratio.size(); ++i)
        ratio.data()[i] = num.data()[i] / (den.data()[i] + kDenomEps);
    return ratio;
}

DenseMatrix update_u_mult(const SparseMatrix& c, const DenseMatrix& u,
                          const DenseMatrix& v, const DenseMatrix& b1,
                          double beta1, double beta2) {
    return apply_ratio(u, multiplicative_ratio_u(c, u, v, b1, beta1, beta2));
}

DenseMatrix update_v_mult(const SparseMatrix& c, const DenseMatrix& u,
                          const DenseMatrix& v, double beta3) {
    require_shape(c.rows() == u.rows() && c.cols() == v.cols() &&
                      u.cols() == v.rows(),
                  "update_v_mult: inconsistent shapes");
    DenseMatrix num = spmm_t(c, u).transposed();  // U^T C, k x d
    DenseMatrix den = matmul(matmul(u.transposed(), u), v);
    for (std::size_t i = 0; i < den.size(); ++i)
        den.data()[i] += beta3 * v.data()[i];
    DenseMatrix out(v.rows(), v.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double f = v.data()[i];
        out.data()[i] =
            f == 0.0 ? 0.0 : f * num.data()[i] / (den.data()[i] + kDenomEps);
    }
    return out;
}

DenseMatrix update_b1_mult(const SparseMatrix& m, const DenseMatrix& b1,
                           const DenseMatrix& b2, const DenseMatrix& u,
                           double alpha1, double alpha2) {
    return apply_ratio(b1,
                       multiplicative_ratio_b1(m, b1, b2, u, alpha1, alpha2));
}

DenseMatrix update_b2_mult(const SparseMatrix& m, const DenseMatrix& b1,
                           const DenseMatrix& b2, double alpha3) {
    require_shape(m.rows() == b1.rows() && m.cols() == b2.cols() &&
                      b1.cols() == b2.rows(),
                  "update_b2_mult: inconsistent shapes");
    DenseMatrix num = spmm_t(m, b1).transposed();  // B1^T M, k x n
    DenseMatrix den = matmul(matmul(b1.transposed(), b1), b2);
    for (std::size_t i = 0; i < den.size(); ++i)
        den.data()[i] += alpha3 * b2.data()[i];
    DenseMatrix out(b2.rows(), b2.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double f = b2.data()[i];
        out.data()[i] =
            f == 0.0 ? 0.0 : f * num.data()[i] / (den.data()[i] + kDenomEps);
    }
    return out;
}

DenseMatrix update_u_l1(const SparseMatrix& c, const DenseMatrix& u,
                        const DenseMatrix& v, const DenseMatrix& b1,
                        double beta1, double beta2) {
    require_shape(c.rows() == u.rows() && c.cols() == v.cols() &&
                      u.cols() == v.rows() && b1.rows() == u.rows() &&
                      b1.cols() == u.cols(),
                  "update_u_l1: inconsistent shapes");
    DenseMatrix num = spmm(c, v.transposed());
    for (std::size_t i = 0; i < num.size(); ++i) {
        const double raw = num.data()[i] + beta1 * b1.data()[i] - beta2;
        num.data()[i] = raw > 0.0 ? raw : 0.0;
    }
    DenseMatrix den = matmul(u, matmul(v, v.transposed()));
    for (std::size_t i = 0; i < den.size(); ++i)
        den.data()[i] += beta1 * u.data()[i];
    DenseMatrix out(u.rows(), u.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double f = u.data()[i];
        out.data()[i] =
            f == 0.0 ? 0.0 : f * num.data()[i] / (den.data()[i] + kDenomEps);
    }
    return out;
}

DenseMatrix update_v_l1(const SparseMatrix& c, const DenseMatrix& u,
                        const DenseMatrix& v, double beta3) {
    require_shape(c.rows() == u.rows() && c.cols() == v.cols() &&
                      u.cols() == v.rows(),
                  "update_v_l1: inconsistent shapes");
    DenseMatrix num = spmm_t(c, u).transposed();
    for (std::size_t i = 0; i < num.size(); ++i) {
        const double raw = num.data()[i] - beta3;
        num.data()[i] = raw > 0.0 ? raw : 0.0;
    }
    DenseMatrix den = matmul(matmul(u.transposed(), u), v);
    DenseMatrix out(v.rows(), v.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double f = v.data()[i];
        out.data()[i] =
            f == 0.0 ? 0.0 : f * num.data()[i] / (den.data()[i] + kDenomEps);
    }
    return out;
}

double line_search_alpha(const SparseMatrix& c, const DenseMatrix& u,
                         const DenseMatrix& v, const DenseMatrix& b1,
                         const DenseMatrix& p) {
    require_shape(p.rows() == u.rows() && p.cols() == u.cols(),
                  "line_search_alpha: P must match U");
    // numerator: || 2 (C - U V) V^T - 4 U + 2 B1 ||_F
    DenseMatrix cvt = spmm(c, v.transposed());
    DenseMatrix uvvt = matmul(u, matmul(v, v.transposed()));
    double num_sq = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double e = 2.0 * (cvt.data()[i] - uvvt.data()[i]) -
                         4.0 * u.data()[i] + 2.0 * b1.data()[i];
        num_sq += e * e;
    }
    // denominator: || (U .* (P - 1)) V V^T + 2 (U .* (P - 1)) ||_F
    DenseMatrix w(u.rows(), u.cols());
    for (std::size_t i = 0; i < u.size(); ++i)
        w.data()[i] = u.data()[i] * (p.data()[i] - 1.0);
    DenseMatrix wvvt = matmul(w, matmul(v, v.transposed()));
    double den_sq = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double e = wvvt.data()[i] + 2.0 * w.data()[i];
        den_sq += e * e;
    }
    const double num = std::sqrt(num_sq);
    const double den = std::sqrt(den_sq);
    if (num < 1e-12 || den < 1e-12) return 1.0;
    return std::min(num / den, 1.0);
}

namespace {

// Positive/negative-section selection of Boutsidis & Gallopoulos. The
// leading triplet is taken in absolute value; each later triplet keeps
// whichever sign section carries more mass (ties go positive).
void nndsvd_pair(const TruncatedSvd& svd, DenseMatrix& w, DenseMatrix& h) {
    const std::size_t rows = svd.u.rows();
    const std::size_t cols = svd.vt.cols();
    const std::size_t k = svd.sigma.size();
    w = DenseMatrix(rows, k);
    h = DenseMatrix(k, cols);
    if (k == 0) return;
    {
        const double scale = std::sqrt(svd.sigma[0]);
        for (std::size_t i = 0; i < rows; ++i)
            w(i, 0) = scale * std::abs(svd.u(i, 0));
        for (std::size_t j = 0; j < cols; ++j)
            h(0, j) = scale * std::abs(svd.vt(0, j));
    }
    for (std::size_t t = 1; t < k; ++t) {
        if (svd.sigma[t] == 0.0) continue;
        double xp = 0.0, xn = 0.0, yp = 0.0, yn = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            const double val = svd.u(i, t);
            (val >= 0.0 ? xp : xn) += val * val;
        }
        for (std::size_t j = 0; j < cols; ++j) {
            const double val = svd.vt(t, j);
            (val >= 0.0 ? yp : yn) += val * val;
        }
        const double mp = std::sqrt(xp) * std::sqrt(yp);
        const double mn = std::sqrt(xn) * std::sqrt(yn);
        const bool positive = mp >= mn;
        const double mass = positive ? mp : mn;
        if (mass == 0.0) continue;
        const double xnorm = std::sqrt(positive ? xp : xn);
        const double ynorm = std::sqrt(positive ? yp : yn);
        const double scale = std::sqrt(svd.sigma[t] * mass);
        for (std::size_t i = 0; i < rows; ++i) {
            const double val = svd.u(i, t);
            const double part = positive ? std::max(val, 0.0)
                                         : std::max(-val, 0.0);
            w(i, t) = scale * part / xnorm;
        }
        for (std::size_t j = 0; j < cols; ++j) {
            const double val = svd.vt(t, j);
            const double part = positive ? std::max(val, 0.0)
                                         : std::max(-val, 0.0);
            h(t, j) = scale * part / ynorm;
        }
    }
}

double matrix_mean(const SparseMatrix& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0.0;
    double sum = 0.0;
    for (double v : m.values()) sum += v;
    return sum / (static_cast<double>(m.rows()) *
                  static_cast<double>(m.cols()));
}

void fill_zeros(DenseMatrix& m, double value) {
    for (double& v : m.values())
        if (v == 0.0) v = value;
}

bool all_finite(const DenseMatrix& m) {
    for (double v : m.values())
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

FactorState init_factors(const SparseMatrix& m, const SparseMatrix& c,
                         std::size_t k, InitMethod method, Variant variant,
                         std::uint64_t seed) {
    const std::size_t n = m.rows();
    const std::size_t d = c.cols();
    if (m.rows() != m.cols())
        throw ShapeError("init_factors: structure matrix must be square");
    if (c.rows() != n)
        throw ShapeError("init_factors: content rows must equal node count");
    if (k < 1 || k >= std::min(n, d))
        throw ParamError("init_factors: k=" + std::to_string(k) +
                         " must satisfy 1 <= k < min(n,d)=" +
                         std::to_string(std::min(n, d)));
    FactorState s;
    if (method == InitMethod::random_uniform) {
        Rng rng(derive_seed(seed, 0));
        auto fill = [&](DenseMatrix& mat, std::size_t r, std::size_t cc) {
            mat = DenseMatrix(r, cc);
            for (double& v : mat.values()) {
                do {
                    v = rng.next_double();
                } while (v == 0.0);  // open interval (0,1)
            }
        };
        fill(s.b1, n, k);
        fill(s.b2, k, n);
        fill(s.u, n, k);
        fill(s.v, k, d);
        return s;
    }
    // NNDSVD. Initialization needs a good subspace, not a certified
    // eigenpair, so the SVD is taken best-effort at the default sweep limit.
    SvdOptions opts;
    opts.fail_on_nonconvergence = false;
    nndsvd_pair(truncated_svd(m, k, derive_seed(seed, 1), opts), s.b1, s.b2);
    nndsvd_pair(truncated_svd(c, k, derive_seed(seed, 2), opts), s.u, s.v);
    if (variant == Variant::multiplicative ||
        variant == Variant::multiplicative_l1) {
        const double mean_m = matrix_mean(m);
        const double mean_c = matrix_mean(c);
        fill_zeros(s.b1, mean_m);
        fill_zeros(s.b2, mean_m);
        fill_zeros(s.u, mean_c);
        fill_zeros(s.v, mean_c);
    }
    return s;
}

RunResult run_fscnmf(const SparseMatrix& m, const SparseMatrix& c,
                     const Hyperparams& hp) {
    if (m.rows() != m.cols())
        throw ShapeError("run_fscnmf: structure matrix must be square");
    if (c.rows() != m.rows())
        throw ShapeError("run_fscnmf: content rows must equal node count");
    hp.validate(m.rows(), c.cols());

    RunResult res;
    res.state = init_factors(m, c, hp.k, hp.init, hp.variant, hp.seed);
    FactorState& s = res.state;
    CostTrace& trace = res.trace;

    auto check_finite = [&](const char* where) {
        if (!all_finite(s.b1) || !all_finite(s.b2) || !all_finite(s.u) ||
            !all_finite(s.v))
            throw NumericalError(
                std::string("non-finite factor entry after ") + where, trace);
    };
    check_finite("initialization");

    double d1 = cost_d1(m, s, hp);
    double d2 = cost_d2(c, s, hp);
    trace.rows.push_back({0, Phase::init, 0, d1, d2});
    double prev_total = d1 + d2;

    for (std::size_t outer = 1; outer <= hp.max_outer; ++outer) {
        const auto started = std::chrono::steady_clock::now();
        for (std::size_t inner = 1; inner <= hp.inner_iters; ++inner) {
            if (hp.variant == Variant::als) {
                s.b1 = update_b1_als(m, s.b2, s.u, hp.alpha1, hp.alpha2);
                s.b2 = update_b2_als(m, s.b1, hp.alpha3);
            } else {
                DenseMatrix ratio = multiplicative_ratio_b1(
                    m, s.b1, s.b2, s.u, hp.alpha1, hp.alpha2);
                if (hp.line_search) {
                    const double alpha =
                        line_search_alpha(m, s.b1, s.b2, s.u, ratio);
                    s.b1 = damped_step(s.b1, ratio, alpha);
                } else {
                    s.b1 = apply_ratio(s.b1, ratio);
                }
                s.b2 = update_b2_mult(m, s.b1, s.b2, hp.alpha3);
            }
            check_finite("structure update");
            d1 = cost_d1(m, s, hp);
            d2 = cost_d2(c, s, hp);
            trace.rows.push_back({outer, Phase::structure, inner, d1, d2});
        }
        for (std::size_t inner = 1; inner <= hp.inner_iters; ++inner) {
            switch (hp.variant) {
                case Variant::als:
                    s.u = update_u_als(c, s.v, s.b1, hp.beta1, hp.beta2);
                    s.v = update_v_als(c, s.u, hp.beta3);
                    break;
                case Variant::multiplicative: {
                    DenseMatrix ratio = multiplicative_ratio_u(
                        c, s.u, s.v, s.b1, hp.beta1, hp.beta2);
                    if (hp.line_search) {
                        const double alpha =
                            line_search_alpha(c, s.u, s.v, s.b1, ratio);
                        s.u = damped_step(s.u, ratio, alpha);
                    } else {
                        s.u = apply_ratio(s.u, ratio);
                    }
                    s.v = update_v_mult(c, s.u, s.v, hp.beta3);
                    break;
                }
                case Variant::multiplicative_l1:
                    // The L1 rule is not a plain multiplicative step, so the
                    // damped line search does not apply on this side.
                    s.u = update_u_l1(c, s.u, s.v, s.b1, hp.beta1, hp.beta2);
                    s.v = update_v_l1(c, s.u, s.v, hp.beta3);
                    break;
            }
            check_finite("content update");
            d1 = cost_d1(m, s, hp);
            d2 = cost_d2(c, s, hp);
            trace.rows.push_back({outer, Phase::content, inner, d1, d2});
        }
        const auto finished = std::chrono::steady_clock::now();
        res.outer_seconds.push_back(
            std::chrono::duration<double>(finished - started).count());
        const double total = d1 + d2;
        if (std::abs(prev_total - total) <
            hp.rel_tol * std::max(prev_total, 1e-300))
            break;
        prev_total = total;
    }
    return res;
}

Embedding combine(const DenseMatrix& b1, const DenseMatrix& u, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw ParamError("gamma must lie in [0,1]");
    require_shape(b1.rows() == u.rows() && b1.cols() == u.cols(),
                  "combine: B1 and U must have equal shapes");
    Embedding e;
    e.gamma_used = gamma;
    e.matrix = DenseMatrix(b1.rows(), b1.cols());
    for (std::size_t i = 0; i < b1.size(); ++i)
        e.matrix.data()[i] =
            gamma * b1.data()[i] + (1.0 - gamma) * u.data()[i];
    return e;
}

LemmaProbeResult lemma_probe(const DenseMatrix& c, const DenseMatrix& u) {
    require_shape(c.rows() == 2 && c.cols() == 2 && u.rows() == 2 &&
                      u.cols() == 2,
                  "lemma_probe: inputs must be 2x2");
    if (c(0, 0) != c(1, 0) || c(0, 1) != c(1, 1) || u(0, 0) != u(1, 0) ||
        u(0, 1) != u(1, 1))
        throw ParamError("lemma_probe: rows must be equal");
    for (std::size_t i = 0; i < 4; ++i)
        if (c.data()[i] < 1.0 || u.data()[i] < 1.0)
            throw ParamError("lemma_probe: entries must be >= 1");
    const double c1 = c(0, 0), c2 = c(0, 1), c3 = c(1, 0), c4 = c(1, 1);
    const double u1 = u(0, 0), u2 = u(0, 1), u3 = u(1, 0), u4 = u(1, 1);
    DenseMatrix p(2, 2);
    p(0, 0) = (c1 * u1 + c2 * u2) / (2.0 * u1);
    p(0, 1) = (c1 * u3 + c2 * u4) / (2.0 * u2);
    p(1, 0) = (c3 * u1 + c4 * u2) / (2.0 * u3);
    p(1, 1) = (c3 * u3 + c4 * u4) / (2.0 * u4);
    DenseMatrix after(2, 2);
    for (std::size_t i = 0; i < 4; ++i)
        after.data()[i] = u.data()[i] * p.data()[i];
    auto g = [&](const DenseMatrix& x) {
        return 0.5 * diff_sq(c, x) + 0.5 * frobenius_sq(x);
    };
    LemmaProbeResult out;
    out.f_before = g(u);
    out.f_after = g(after);
    out.holds = out.f_after <= out.f_before;
    return out;
}

void write_embedding_tsv(const std::string& path,
                         const std::vector<std::string>& node_ids,
                         const DenseMatrix& matrix) {
    if (node_ids.size() != matrix.rows())
        throw ShapeError("write_embedding_tsv: id/row count mismatch");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    char buf[64];
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        out << node_ids[i];
        for (std::size_t j = 0; j < matrix.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", matrix(i, j));
            out << '\t' << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

LoadedEmbedding read_embedding_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding " + path);
    LoadedEmbedding out;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string id;
        if (!(ss >> id))
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": missing node id");
        std::vector<double> vals;
        double v;
        while (ss >> v) vals.push_back(v);
        if (vals.empty())
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": no embedding values");
        if (width == 0) width = vals.size();
        if (vals.size() != width)
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": ragged row");
        out.node_ids.push_back(id);
        rows.push_back(std::move(vals));
    }
    out.matrix = DenseMatrix(rows.size(), width);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j) out.matrix(i, j) = rows[i][j];
    return out;
}

void write_cost_trace_csv(const std::string& path, const CostTrace& trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "outer,phase,inner,d1,d2\n";
    char buf[64];
    for (const CostTrace::Row& row : trace.rows) {
        out << row.outer << ',' << to_string(row.phase) << ',' << row.inner;
        std::snprintf(buf, sizeof buf, "%.17g", row.d1);
        out << ',' << buf;
        std::snprintf(buf, sizeof buf, "%.17g", row.d2);
        out << ',' << buf << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace fscnmf
