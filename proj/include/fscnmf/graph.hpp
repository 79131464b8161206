#ifndef FSCNMF_GRAPH_HPP
#define FSCNMF_GRAPH_HPP

#include <string>
#include <utility>
#include <vector>

#include "fscnmf/linalg.hpp"

namespace fscnmf {

/// Node-indexed sparse weighted digraph with optional ground-truth labels.
/// External node ids are mapped to 0..n-1; the adjacency diagonal is always
/// zero (self-loops are dropped at load time and counted).
struct AttributedGraph {
    std::vector<std::string> node_ids;
    bool directed = false;
    SparseMatrix adjacency;        // n x n, entries >= 0
    std::vector<int> labels;       // empty, or one dense label per node
    int num_classes = 0;
    std::size_t self_loops_dropped = 0;

    std::size_t n() const { return node_ids.size(); }
    bool has_labels() const { return !labels.empty(); }
};

struct ProximityMatrix {
    int m_order = 1;
    SparseMatrix matrix;  // n x n, entries >= 0
};

/// Load a tab/whitespace-separated edge list ("src dst" or "src dst weight";
/// '#' lines are comments). Node ids are assigned 0..n-1 in first-appearance
/// order; `preregistered_ids`, when given, are assigned first (in order),
/// which pins the index layout to an external node-order file.
AttributedGraph load_edge_list(
    const std::string& path, bool directed, double default_weight = 1.0,
    const std::vector<std::string>& preregistered_ids = {});

/// Attach ground-truth labels ("node_id<TAB>label" per line). Every node of g
/// must be covered; label names are densified to 0..K-1 in lexicographic
/// order.
void load_labels(const std::string& path, AttributedGraph& g);

/// Densify string labels to 0..K-1 in lexicographic label-name order.
std::pair<std::vector<int>, int> densify_labels(
    const std::vector<std::string>& raw);

/// M = (A + A^2 + ... + A^m) / m, computed by repeated sparse products.
/// Order 1 returns A unchanged.
ProximityMatrix proximity_matrix(const AttributedGraph& g, int m_order);

/// One external node id per line, in internal index order.
void save_node_order(const AttributedGraph& g, const std::string& path);
std::vector<std::string> load_node_order(const std::string& path);

}  // namespace fscnmf

#endif
