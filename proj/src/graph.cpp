#include "fscnmf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace fscnmf {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

bool parse_weight(const std::string& s, double& out) {
    try {
        std::size_t consumed = 0;
        out = std::stod(s, &consumed);
        return consumed == s.size() && std::isfinite(out);
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

AttributedGraph load_edge_list(
    const std::string& path, bool directed, double default_weight,
    const std::vector<std::string>& preregistered_ids) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open edge list " + path);

    AttributedGraph g;
    g.directed = directed;
    std::unordered_map<std::string, std::size_t> index;
    auto intern = [&](const std::string& id) {
        auto [it, inserted] = index.emplace(id, g.node_ids.size());
        if (inserted) g.node_ids.push_back(id);
        return it->second;
    };
    for (const std::string& id : preregistered_ids) intern(id);

    struct RawEdge {
        std::size_t src, dst;
        double w;
    };
    std::vector<RawEdge> edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto toks = split_ws(line);
        if (toks.size() != 2 && toks.size() != 3)
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected src<TAB>dst[<TAB>weight]");
        double w = default_weight;
        if (toks.size() == 3) {
            if (!parse_weight(toks[2], w))
                throw ParseError(path + ":" + std::to_string(lineno) +
                                 ": non-numeric weight '" + toks[2] + "'");
            if (w < 0.0)
                throw ParseError(path + ":" + std::to_string(lineno) +
                                 ": negative weight " + toks[2]);
        }
        const std::size_t s = intern(toks[0]);
        const std::size_t d = intern(toks[1]);
        if (s == d) {
            ++g.self_loops_dropped;
            continue;
        }
        edges.push_back({s, d, w});
    }

    std::vector<Triplet> triplets;
    triplets.reserve(directed ? edges.size() : 2 * edges.size());
    for (const RawEdge& e : edges) {
        triplets.push_back({e.src, e.dst, e.w});
        if (!directed) triplets.push_back({e.dst, e.src, e.w});
    }
    g.adjacency = SparseMatrix(g.n(), g.n(), std::move(triplets));
    return g;
}

std::pair<std::vector<int>, int> densify_labels(
    const std::vector<std::string>& raw) {
    std::map<std::string, int> dense;  // ordered: lexicographic label names
    for (const std::string& name : raw) dense.emplace(name, 0);
    int next = 0;
    for (auto& [name, id] : dense) id = next++;
    std::vector<int> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = dense[raw[i]];
    return {std::move(out), next};
}

void load_labels(const std::string& path, AttributedGraph& g) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open label file " + path);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < g.n(); ++i) index.emplace(g.node_ids[i], i);

    std::vector<std::string> raw(g.n());
    std::vector<bool> seen(g.n(), false);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto toks = split_ws(line);
        if (toks.size() != 2)
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected node_id<TAB>label");
        auto it = index.find(toks[0]);
        if (it == index.end())
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": unknown node id '" + toks[0] + "'");
        raw[it->second] = toks[1];
        seen[it->second] = true;
    }
    for (std::size_t i = 0; i < g.n(); ++i)
        if (!seen[i])
            throw ValidationError("node '" + g.node_ids[i] +
                                  "' has no label in " + path);
    auto [labels, k] = densify_labels(raw);
    g.labels = std::move(labels);
    g.num_classes = k;
}

ProximityMatrix proximity_matrix(const AttributedGraph& g, int m_order) {
    if (m_order < 1)
        throw ParamError("proximity order must be >= 1, got " +
                         std::to_string(m_order));
    ProximityMatrix out;
    out.m_order = m_order;
    if (m_order == 1) {
        out.matrix = g.adjacency;
        return out;
    }
    SparseMatrix power = g.adjacency;  // A^1
    SparseMatrix sum = g.adjacency;
    for (int l = 2; l <= m_order; ++l) {
        power = spmm_sparse(power, g.adjacency);
        sum = sparse_add(sum, power);
    }
    out.matrix = sparse_scale(sum, 1.0 / static_cast<double>(m_order));
    return out;
}

void save_node_order(const AttributedGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (const std::string& id : g.node_ids) out << id << '\n';
    if (!out) throw IoError("write failed for " + path);
}

std::vector<std::string> load_node_order(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open node order file " + path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ids.push_back(line);
    }
    return ids;
}

}  // namespace fscnmf
