#ifndef FSCNMF_EVAL_HPP
#define FSCNMF_EVAL_HPP

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "fscnmf/linalg.hpp"

namespace fscnmf {

struct ClusteringResult {
    std::vector<int> assignments;  // one cluster index per row of X
    double inertia = 0.0;
    std::optional<double> accuracy;  // filled by callers with ground truth
};

/// Lloyd's algorithm with k-means++ seeding, best of n_init restarts by
/// inertia. Empty clusters are repaired by promoting the point farthest from
/// its centroid. Deterministic for a fixed seed. `inertia_history`, when
/// non-null, receives the inertia after every assignment step (test hook).
ClusteringResult kmeans(const DenseMatrix& x, std::size_t k,
                        std::uint64_t seed, std::size_t n_init = 10,
                        std::size_t max_iters = 300, double tol = 1e-6,
                        std::vector<double>* inertia_history = nullptr);

/// Unsupervised clustering accuracy: fraction correct under the best
/// relabeling, computed by optimal assignment on the confusion matrix
/// (Hungarian algorithm), which attains the exhaustive-permutation maximum.
double unsup_accuracy(const std::vector<int>& pred,
                      const std::vector<int>& truth);

/// Per-class split preserving proportions to rounding, at least one train
/// sample per class (and at least one test sample). Deterministic per seed.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<int>& labels, double train_fraction, std::uint64_t seed);

/// Euclidean k-NN with majority vote; distance ties break toward the lower
/// training index, vote ties toward the smaller label.
std::vector<int> knn_classify(const DenseMatrix& train_x,
                              const std::vector<int>& train_y,
                              const DenseMatrix& test_x,
                              std::size_t k_neighbors = 5);

struct ClassificationReport {
    struct PerClass {
        int label;
        double precision;
        double recall;
        double f1;
        std::size_t support;
    };
    double macro_f1 = 0.0;
    double micro_f1 = 0.0;
    std::vector<PerClass> per_class;  // classes present in truth, ascending
    double train_fraction = 0.0;      // filled by callers
};

/// Macro-F1 (unweighted mean over classes present in truth) and micro-F1
/// (pooled counts; equals accuracy for single-label predictions).
ClassificationReport f1_scores(const std::vector<int>& pred,
                               const std::vector<int>& truth);

}  // namespace fscnmf

#endif
