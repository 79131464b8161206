#ifndef FSCNMF_FACTOR_HPP
#define FSCNMF_FACTOR_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fscnmf/linalg.hpp"

namespace fscnmf {

enum class Variant { als, multiplicative, multiplicative_l1 };
enum class InitMethod { nndsvd, random_uniform };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);
InitMethod init_from_string(const std::string& s);
std::string to_string(InitMethod m);

struct Hyperparams {
    double alpha1 = 1.0, alpha2 = 1.0, alpha3 = 1.0;
    double beta1 = 1.0, beta2 = 1.0, beta3 = 1.0;
    std::size_t k = 0;
    double gamma = 0.5;
    int m_order = 1;
    std::size_t inner_iters = 3;
    std::size_t max_outer = 100;
    double rel_tol = 1e-4;
    Variant variant = Variant::als;
    bool line_search = false;
    std::uint64_t seed = 0;
    InitMethod init = InitMethod::nndsvd;

    // n, d are the data dimensions the run will see; k must satisfy
    // k < min(n, d).
    void validate(std::size_t n, std::size_t d) const;
};

/// The four factor matrices. Entries are >= 0 and finite at every point a
/// caller can observe them.
struct FactorState {
    DenseMatrix b1;  // n x k, structure embedding
    DenseMatrix b2;  // k x n
    DenseMatrix u;   // n x k, content embedding
    DenseMatrix v;   // k x d
};

enum class Phase { init, structure, content };
const char* to_string(Phase p);

struct CostTrace {
    struct Row {
        std::size_t outer;
        Phase phase;
        std::size_t inner;
        double d1;
        double d2;
    };
    std::vector<Row> rows;
};

struct Embedding {
    DenseMatrix matrix;  // n x k, rows aligned with node order
    double gamma_used = 0.5;
    Variant variant = Variant::als;
    int m_order = 1;
    std::uint64_t seed = 0;
};

/// Optimization failed with a non-finite factor entry; carries the cost
/// trace recorded up to the failure.
struct NumericalError : Error {
    NumericalError(const std::string& what, CostTrace trace_)
        : Error(what), trace(std::move(trace_)) {}
    CostTrace trace;
};

/// D1 = ||M - B1 B2||_F^2 + a1 ||B1 - U||_F^2 + a2 ||B1||_F^2 + a3 ||B2||_F^2
double cost_d1(const SparseMatrix& m, const FactorState& s,
               const Hyperparams& hp);

/// D2 = ||C - U V||_F^2 + b1 ||U - B1||_F^2 + b2 ||U||_F^2 + b3 ||V||_F^2
double cost_d2(const SparseMatrix& c, const FactorState& s,
               const Hyperparams& hp);

// Projected closed-form (ALS) updates. Each solves its convex quadratic
// subproblem exactly, then clamps negative entries to zero; `clipped`, when
// non-null, reports whether the projection changed anything.
DenseMatrix update_b1_als(const SparseMatrix& m, const DenseMatrix& b2,
                          const DenseMatrix& u, double alpha1, double alpha2,
                          bool* clipped = nullptr);
DenseMatrix update_b2_als(const SparseMatrix& m, const DenseMatrix& b1,
                          double alpha3, bool* clipped = nullptr);
DenseMatrix update_u_als(const SparseMatrix& c, const DenseMatrix& v,
                         const DenseMatrix& b1, double beta1, double beta2,
                         bool* clipped = nullptr);
DenseMatrix update_v_als(const SparseMatrix& c, const DenseMatrix& u,
                         double beta3, bool* clipped = nullptr);

// Multiplicative ratio matrices; P has the factor's shape and the update is
// factor' = factor .* P. Denominators carry a 1e-12 stabilizer.
DenseMatrix multiplicative_ratio_u(const SparseMatrix& c, const DenseMatrix& u,
                                   const DenseMatrix& v, const DenseMatrix& b1,
                                   double beta1, double beta2);
DenseMatrix multiplicative_ratio_b1(const SparseMatrix& m,
                                    const DenseMatrix& b1,
                                    const DenseMatrix& b2,
                                    const DenseMatrix& u, double alpha1,
                                    double alpha2);

// Multiplicative updates. Entries that are exactly zero stay exactly zero.
DenseMatrix update_u_mult(const SparseMatrix& c, const DenseMatrix& u,
                          const DenseMatrix& v, const DenseMatrix& b1,
                          double beta1, double beta2);
DenseMatrix update_v_mult(const SparseMatrix& c, const DenseMatrix& u,
                          const DenseMatrix& v, double beta3);
// Structure-side twins, obtained from the content rules by the symmetry
// M<->C, B1<->U, B2<->V.
DenseMatrix update_b1_mult(const SparseMatrix& m, const DenseMatrix& b1,
                           const DenseMatrix& b2, const DenseMatrix& u,
                           double alpha1, double alpha2);
DenseMatrix update_b2_mult(const SparseMatrix& m, const DenseMatrix& b1,
                           const DenseMatrix& b2, double alpha3);

// L1-penalized updates: the ridge on U (resp. V) is replaced by an L1 term,
// which subtracts the weight inside a clamped numerator and sparsifies.
DenseMatrix update_u_l1(const SparseMatrix& c, const DenseMatrix& u,
                        const DenseMatrix& v, const DenseMatrix& b1,
                        double beta1, double beta2);
DenseMatrix update_v_l1(const SparseMatrix& c, const DenseMatrix& u,
                        const DenseMatrix& v, double beta3);

/// Backtracking-style step size for the damped multiplicative move
/// U <- U + alpha (U .* P - U). Returns a value in (0, 1]; degenerate
/// numerator or denominator falls back to 1 (the plain multiplicative step).
double line_search_alpha(const SparseMatrix& c, const DenseMatrix& u,
                         const DenseMatrix& v, const DenseMatrix& b1,
                         const DenseMatrix& p);

/// NNDSVD (positive-section selection per singular triplet) or seeded
/// uniform initialization. Multiplicative variants get the NNDSVD-a fill:
/// zeros replaced by the data-matrix mean so they cannot lock.
FactorState init_factors(const SparseMatrix& m, const SparseMatrix& c,
                         std::size_t k, InitMethod method, Variant variant,
                         std::uint64_t seed);

struct RunResult {
    FactorState state;
    CostTrace trace;
    std::vector<double> outer_seconds;  // wall time per outer iteration
};

/// The alternating outer loop: per outer iteration, inner_iters (B1,B2)
/// updates against D1 with U held fixed, then inner_iters (U,V) updates
/// against D2 with B1 held fixed. Stops when the relative change of D1+D2
/// over one outer iteration drops below rel_tol, or at max_outer.
RunResult run_fscnmf(const SparseMatrix& m, const SparseMatrix& c,
                     const Hyperparams& hp);

/// gamma * B1 + (1 - gamma) * U.
Embedding combine(const DenseMatrix& b1, const DenseMatrix& u, double gamma);

/// Empirical probe of a conjectured descent direction for the 2x2
/// equal-row multiplicative step with entries >= 1: evaluates
/// g(X) = 0.5 ||C - X||_F^2 + 0.5 ||X||_F^2 before and after U .* P.
/// Report-only: callers must not assume `holds`.
struct LemmaProbeResult {
    double f_before;
    double f_after;
    bool holds;
};
LemmaProbeResult lemma_probe(const DenseMatrix& c, const DenseMatrix& u);

// -- Output formats ---------------------------------------------------------

/// TSV, one row per node: node_id, then k values at 17 significant digits.
void write_embedding_tsv(const std::string& path,
                         const std::vector<std::string>& node_ids,
                         const DenseMatrix& matrix);

struct LoadedEmbedding {
    std::vector<std::string> node_ids;
    DenseMatrix matrix;
};
LoadedEmbedding read_embedding_tsv(const std::string& path);

/// CSV with header "outer,phase,inner,d1,d2".
void write_cost_trace_csv(const std::string& path, const CostTrace& trace);

}  // namespace fscnmf

#endif
