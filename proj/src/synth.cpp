#include "fscnmf/synth.hpp"

#include <algorithm>
#include <cmath>

#include "fscnmf/rng.hpp"

namespace fscnmf {

namespace {

std::string padded(const char* prefix, std::size_t value, std::size_t max) {
    std::size_t width = 1;
    for (std::size_t v = max; v >= 10; v /= 10) ++width;
    std::string digits = std::to_string(value);
    std::string out(prefix);
    out.append(width - digits.size(), '0');
    out += digits;
    return out;
}

}  // namespace

void SynthConfig::validate() const {
    if (num_communities < 1) throw ParamError("K must be >= 1");
    if (n < num_communities)
        throw ParamError("n=" + std::to_string(n) + " must be >= K=" +
                         std::to_string(num_communities));
    if (!(p_in >= 0.0 && p_in <= 1.0) || !(p_out >= 0.0 && p_out <= 1.0))
        throw ParamError("edge probabilities must lie in [0,1]");
    if (!(signal_q >= 0.0 && signal_q <= 1.0))
        throw ParamError("q must lie in [0,1]");
    if (vocab_size < 2 * num_communities)
        throw ParamError("vocab size must be >= 2K");
    if (doc_len < 1) throw ParamError("doc length must be >= 1");
}

std::string synth_label_name(const SynthConfig& cfg, int label) {
    return padded("c", static_cast<std::size_t>(label),
                  cfg.num_communities - 1);
}

AttributedGraph planted_partition(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.n;
    const std::size_t k = cfg.num_communities;

    AttributedGraph g;
    g.directed = false;
    g.node_ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        g.node_ids.push_back(padded("n", i, n - 1));

    // Blocks are contiguous and near-equal: the first n%K blocks get one
    // extra node.
    g.labels.resize(n);
    g.num_classes = static_cast<int>(k);
    {
        const std::size_t base = n / k;
        const std::size_t extra = n % k;
        std::size_t node = 0;
        for (std::size_t b = 0; b < k; ++b) {
            const std::size_t size = base + (b < extra ? 1 : 0);
            for (std::size_t j = 0; j < size; ++j)
                g.labels[node++] = static_cast<int>(b);
        }
    }

    Rng rng(derive_seed(cfg.seed, 1));
    std::vector<Triplet> triplets;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double p =
                g.labels[i] == g.labels[j] ? cfg.p_in : cfg.p_out;
            if (rng.next_double() < p) {
                triplets.push_back({i, j, 1.0});
                triplets.push_back({j, i, 1.0});
            }
        }
    }
    g.adjacency = SparseMatrix(n, n, std::move(triplets));
    return g;
}

TokenDocs class_content(const std::vector<int>& labels,
                        const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t k = cfg.num_communities;
    // Vocabulary splits into K+1 near-equal parts; the last is the shared
    // noise block.
    std::vector<std::size_t> part_start(k + 2, 0);
    {
        const std::size_t base = cfg.vocab_size / (k + 1);
        const std::size_t extra = cfg.vocab_size % (k + 1);
        for (std::size_t b = 0; b < k + 1; ++b)
            part_start[b + 1] =
                part_start[b] + base + (b < extra ? 1 : 0);
    }
    std::vector<std::string> tokens(cfg.vocab_size);
    for (std::size_t t = 0; t < cfg.vocab_size; ++t)
        tokens[t] = padded("w", t, cfg.vocab_size - 1);

    Rng rng(derive_seed(cfg.seed, 2));
    TokenDocs docs(labels.size());
    const std::size_t noise_lo = part_start[k];
    const std::size_t noise_len = part_start[k + 1] - part_start[k];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k)
            throw ParamError("class_content: label out of range");
        const std::size_t class_lo = part_start[labels[i]];
        const std::size_t class_len =
            part_start[labels[i] + 1] - part_start[labels[i]];
        docs[i].reserve(cfg.doc_len);
        for (std::size_t t = 0; t < cfg.doc_len; ++t) {
            const bool from_class = rng.next_double() < cfg.signal_q;
            const std::size_t lo = from_class ? class_lo : noise_lo;
            const std::size_t len = from_class ? class_len : noise_len;
            docs[i].push_back(tokens[lo + rng.below(len)]);
        }
    }
    return docs;
}

}  // namespace fscnmf
