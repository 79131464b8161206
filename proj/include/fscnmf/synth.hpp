#ifndef FSCNMF_SYNTH_HPP
#define FSCNMF_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fscnmf/content.hpp"
#include "fscnmf/graph.hpp"

namespace fscnmf {

/// Planted-partition benchmark: K near-equal communities with edge
/// probability p_in inside a block and p_out across blocks, plus
/// class-correlated bag-of-words documents. Defaults are the desk-scale
/// reference instance used throughout the test harness.
struct SynthConfig {
    std::size_t n = 300;
    std::size_t num_communities = 3;
    double p_in = 0.1;
    double p_out = 0.01;
    std::size_t vocab_size = 200;
    double signal_q = 0.8;  // probability a token comes from the class block
    std::size_t doc_len = 50;
    std::uint64_t seed = 7;

    void validate() const;
    // Soft advisory, not an error: p_out > p_in inverts the usual regime.
    bool inverted_regime() const { return p_out > p_in; }
};

/// Undirected, unweighted planted-partition graph with ground-truth labels
/// attached. Pair draws run in fixed (i, j>i) order; node ids are
/// zero-padded ("n000", ...), labels "c0".."c{K-1}".
AttributedGraph planted_partition(const SynthConfig& cfg);

/// One document per node: each of doc_len tokens comes from the node's class
/// vocabulary block with probability q, otherwise uniformly from the shared
/// noise block. The vocabulary splits into K class blocks plus one noise
/// block, near-equal sizes.
TokenDocs class_content(const std::vector<int>& labels,
                        const SynthConfig& cfg);

std::string synth_label_name(const SynthConfig& cfg, int label);

}  // namespace fscnmf

#endif
