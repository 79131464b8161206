#include "fscnmf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "fscnmf/rng.hpp"

namespace fscnmf {

namespace {

double dist_sq(const DenseMatrix& a, std::size_t row_a, const DenseMatrix& b,
               std::size_t row_b) {
    const double* pa = a.data() + row_a * a.cols();
    const double* pb = b.data() + row_b * b.cols();
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        const double d = pa[j] - pb[j];
        sum += d * d;
    }
    return sum;
}

struct LloydOutcome {
    std::vector<int> assignments;
    double inertia;
};

LloydOutcome lloyd_once(const DenseMatrix& x, std::size_t k, Rng& rng,
                        std::size_t max_iters, double tol,
                        std::vector<double>* inertia_history) {
    const std::size_t n = x.rows();
    const std::size_t dim = x.cols();

    // k-means++ seeding.
    DenseMatrix centroids(k, dim);
    std::vector<bool> is_centroid(n, false);
    std::vector<double> best_d2(n, std::numeric_limits<double>::infinity());
    {
        const std::size_t first = static_cast<std::size_t>(rng.below(n));
        for (std::size_t j = 0; j < dim; ++j)
            centroids(0, j) = x(first, j);
        is_centroid[first] = true;
        for (std::size_t c = 1; c < k; ++c) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                best_d2[i] = std::min(best_d2[i], dist_sq(x, i, centroids,
                                                          c - 1));
                total += best_d2[i];
            }
            std::size_t pick = n;
            if (total > 0.0) {
                const double r = rng.next_double() * total;
                double cum = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    cum += best_d2[i];
                    if (cum > r) {
                        pick = i;
                        break;
                    }
                }
                if (pick == n) {  // fp slack: take the last positive mass
                    for (std::size_t i = n; i-- > 0;) {
                        if (best_d2[i] > 0.0) {
                            pick = i;
                            break;
                        }
                    }
                }
            }
            if (pick == n) {  // all mass zero: first point not yet chosen
                for (std::size_t i = 0; i < n; ++i) {
                    if (!is_centroid[i]) {
                        pick = i;
                        break;
                    }
                }
                if (pick == n) pick = 0;
            }
            for (std::size_t j = 0; j < dim; ++j)
                centroids(c, j) = x(pick, j);
            is_centroid[pick] = true;
        }
    }

    std::vector<int> assign(n, -1);
    std::vector<double> point_d2(n, 0.0);
    double inertia = 0.0;
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_val = dist_sq(x, i, centroids, 0);
            for (std::size_t c = 1; c < k; ++c) {
                const double d = dist_sq(x, i, centroids, c);
                if (d < best_val) {  // strict: ties keep the lower index
                    best_val = d;
                    best = static_cast<int>(c);
                }
            }
            if (assign[i] != best) changed = true;
            assign[i] = best;
            point_d2[i] = best_val;
            inertia += best_val;
        }
        if (inertia_history) inertia_history->push_back(inertia);
        if (!changed) break;

        DenseMatrix sums(k, dim);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = static_cast<std::size_t>(assign[i]);
            ++counts[c];
            for (std::size_t j = 0; j < dim; ++j) sums(c, j) += x(i, j);
        }
        double shift_sq = 0.0;
        std::vector<bool> taken(n, false);
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                for (std::size_t j = 0; j < dim; ++j) {
                    const double next =
                        sums(c, j) / static_cast<double>(counts[c]);
                    const double d = next - centroids(c, j);
                    shift_sq += d * d;
                    centroids(c, j) = next;
                }
            }
        }
        // Repair empty clusters: promote the farthest point (by its current
        // assignment distance), lowest index on ties, one point per cluster.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            std::size_t far = 0;
            double far_val = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (taken[i]) continue;
                if (point_d2[i] > far_val) {
                    far_val = point_d2[i];
                    far = i;
                }
            }
            taken[far] = true;
            for (std::size_t j = 0; j < dim; ++j)
                centroids(c, j) = x(far, j);
            shift_sq += 1.0;  // force another assignment pass
        }
        if (shift_sq <= tol * tol) break;
    }
    return {std::move(assign), inertia};
}

// O(K^3) Hungarian algorithm (potentials + augmenting paths) on an exact
// integer cost matrix; minimizes total cost.
long long hungarian_min(const std::vector<std::vector<long long>>& cost) {
    const std::size_t n = cost.size();
    const long long inf = std::numeric_limits<long long>::max() / 4;
    std::vector<long long> u(n + 1, 0), v(n + 1, 0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<long long> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            long long delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const long long cur =
                    cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    long long total = 0;
    for (std::size_t j = 1; j <= n; ++j)
        if (p[j] != 0) total += cost[p[j] - 1][j - 1];
    return total;
}

}  // namespace

ClusteringResult kmeans(const DenseMatrix& x, std::size_t k,
                        std::uint64_t seed, std::size_t n_init,
                        std::size_t max_iters, double tol,
                        std::vector<double>* inertia_history) {
    if (k < 1 || k > x.rows())
        throw ParamError("kmeans: K=" + std::to_string(k) +
                         " must satisfy 1 <= K <= n=" +
                         std::to_string(x.rows()));
    if (n_init < 1) throw ParamError("kmeans: n_init must be >= 1");
    Rng rng(derive_seed(seed, 0x6b6d6561));
    ClusteringResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (std::size_t restart = 0; restart < n_init; ++restart) {
        LloydOutcome run =
            lloyd_once(x, k, rng, max_iters, tol, inertia_history);
        if (run.inertia < best.inertia) {
            best.inertia = run.inertia;
            best.assignments = std::move(run.assignments);
        }
    }
    return best;
}

double unsup_accuracy(const std::vector<int>& pred,
                      const std::vector<int>& truth) {
    if (pred.size() != truth.size())
        throw ShapeError("unsup_accuracy: length mismatch");
    if (pred.empty()) throw ShapeError("unsup_accuracy: empty input");
    int max_label = 0;
    for (int v : pred) {
        if (v < 0) throw ValidationError("unsup_accuracy: negative label");
        max_label = std::max(max_label, v);
    }
    for (int v : truth) {
        if (v < 0) throw ValidationError("unsup_accuracy: negative label");
        max_label = std::max(max_label, v);
    }
    const std::size_t k = static_cast<std::size_t>(max_label) + 1;
    std::vector<std::vector<long long>> counts(
        k, std::vector<long long>(k, 0));
    for (std::size_t i = 0; i < pred.size(); ++i)
        ++counts[static_cast<std::size_t>(pred[i])]
                [static_cast<std::size_t>(truth[i])];
    std::vector<std::vector<long long>> cost(k, std::vector<long long>(k));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) cost[i][j] = -counts[i][j];
    const long long matched = -hungarian_min(cost);
    return static_cast<double>(matched) / static_cast<double>(pred.size());
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<int>& labels, double train_fraction,
    std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ParamError("train fraction must lie in (0,1)");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[labels[i]].push_back(i);
    if (by_class.empty()) throw ParamError("stratified_split: no labels");
    for (const auto& [label, members] : by_class)
        if (members.size() < 2)
            throw ValidationError("class " + std::to_string(label) +
                                  " has a single member; cannot stratify");
    Rng rng(derive_seed(seed, 0x73706c69));
    std::vector<std::size_t> train, test;
    for (auto& [label, members] : by_class) {
        shuffle(members, rng);
        const double want =
            train_fraction * static_cast<double>(members.size());
        std::size_t n_train = static_cast<std::size_t>(
            std::llround(want));
        n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < n_train ? train : test).push_back(members[i]);
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {std::move(train), std::move(test)};
}

std::vector<int> knn_classify(const DenseMatrix& train_x,
                              const std::vector<int>& train_y,
                              const DenseMatrix& test_x,
                              std::size_t k_neighbors) {
    if (train_x.rows() == 0) throw ValidationError("knn: empty training set");
    if (train_x.rows() != train_y.size())
        throw ShapeError("knn: training label count mismatch");
    if (train_x.cols() != test_x.cols())
        throw ShapeError("knn: feature dimension mismatch");
    if (k_neighbors < 1 || k_neighbors > train_x.rows())
        throw ParamError("knn: k_neighbors out of range");

    std::vector<int> out(test_x.rows());
    std::vector<std::size_t> order(train_x.rows());
    std::vector<double> d2(train_x.rows());
    for (std::size_t t = 0; t < test_x.rows(); ++t) {
        for (std::size_t i = 0; i < train_x.rows(); ++i)
            d2[i] = dist_sq(test_x, t, train_x, i);
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + k_neighbors,
                          order.end(), [&](std::size_t a, std::size_t b) {
                              return d2[a] != d2[b] ? d2[a] < d2[b] : a < b;
                          });
        std::map<int, std::size_t> votes;
        for (std::size_t i = 0; i < k_neighbors; ++i)
            ++votes[train_y[order[i]]];
        int winner = votes.begin()->first;
        std::size_t winner_votes = votes.begin()->second;
        for (const auto& [label, count] : votes) {
            if (count > winner_votes) {  // ties keep the smaller label
                winner = label;
                winner_votes = count;
            }
        }
        out[t] = winner;
    }
    return out;
}

ClassificationReport f1_scores(const std::vector<int>& pred,
                               const std::vector<int>& truth) {
    if (pred.size() != truth.size())
        throw ShapeError("f1_scores: length mismatch");
    if (pred.empty()) throw ShapeError("f1_scores: empty input");
    std::map<int, std::size_t> tp, fp, fn, support;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        ++support[truth[i]];
        if (pred[i] == truth[i]) {
            ++tp[truth[i]];
        } else {
            ++fp[pred[i]];
            ++fn[truth[i]];
        }
    }
    ClassificationReport report;
    double macro_sum = 0.0;
    for (const auto& [label, count] : support) {
        const double tpc = static_cast<double>(tp[label]);
        const double fpc = static_cast<double>(fp[label]);
        const double fnc = static_cast<double>(fn[label]);
        const double precision = tpc + fpc > 0.0 ? tpc / (tpc + fpc) : 0.0;
        const double recall = tpc + fnc > 0.0 ? tpc / (tpc + fnc) : 0.0;
        const double f1 = precision + recall > 0.0
                              ? 2.0 * precision * recall / (precision + recall)
                              : 0.0;
        report.per_class.push_back({label, precision, recall, f1, count});
        macro_sum += f1;
    }
    report.macro_f1 = macro_sum / static_cast<double>(support.size());
    // Pooled counts over all labels: TP = correct, FP = FN = incorrect,
    // so micro-F1 reduces exactly to accuracy for single-label prediction.
    double tp_pool = 0.0, fp_pool = 0.0, fn_pool = 0.0;
    for (const auto& [label, count] : tp) tp_pool += count;
    for (const auto& [label, count] : fp) fp_pool += count;
    for (const auto& [label, count] : fn) fn_pool += count;
    const double micro_p =
        tp_pool + fp_pool > 0.0 ? tp_pool / (tp_pool + fp_pool) : 0.0;
    const double micro_r =
        tp_pool + fn_pool > 0.0 ? tp_pool / (tp_pool + fn_pool) : 0.0;
    report.micro_f1 = micro_p + micro_r > 0.0
                          ? 2.0 * micro_p * micro_r / (micro_p + micro_r)
                          : 0.0;
    return report;
}

}  // namespace fscnmf
