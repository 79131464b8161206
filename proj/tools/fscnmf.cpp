// fscnmf: attributed-network embedding by mutually regularized NMF.
// Subcommands: synth, embed, eval, sweep. Exit codes: 0 success,
// 2 usage/validation, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fscnmf/content.hpp"
#include "fscnmf/eval.hpp"
#include "fscnmf/factor.hpp"
#include "fscnmf/graph.hpp"
#include "fscnmf/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fscnmf;

namespace {

constexpr const char* kArtifactVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

std::string file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for checksum");
    std::uint64_t h = 1469598103934665603ULL;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof buf);
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    char out[32];
    std::snprintf(out, sizeof out, "fnv1a64:%016llx",
                  static_cast<unsigned long long>(h));
    return out;
}

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out))
        throw IoError("cannot create output directory " + out);
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << body;
    if (!out) throw IoError("write failed for " + path);
}

void write_json(const std::string& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

// JSON config files carry flat keys named after the long CLI flags; values
// given on the command line win.
class ConfigBinder {
public:
    template <typename T>
    void bind(CLI::Option* opt, T& target) {
        appliers_.emplace_back(opt, [&target](const json& v) {
            target = v.get<T>();
        });
    }
    void apply(const std::string& config_path) {
        if (config_path.empty()) return;
        std::ifstream in(config_path);
        if (!in) throw IoError("cannot open config " + config_path);
        json j = json::parse(in);
        for (auto& [opt, fn] : appliers_) {
            const std::string key = opt->get_lnames().front();
            if (opt->count() == 0 && j.contains(key)) fn(j.at(key));
        }
    }

private:
    std::vector<std::pair<CLI::Option*, std::function<void(const json&)>>>
        appliers_;
};

// ---------------------------------------------------------------------------
// synth

struct SynthCli {
    std::string out;
    std::string config;
    SynthConfig cfg;
};

int run_synth(const SynthCli& opt) {
    opt.cfg.validate();
    if (opt.cfg.inverted_regime())
        std::cerr << "warning: p-out > p-in inverts the community regime\n";
    ensure_out_dir(opt.out);

    AttributedGraph g = planted_partition(opt.cfg);
    TokenDocs docs = class_content(g.labels, opt.cfg);

    std::ostringstream edges;
    for (std::size_t i = 0; i < g.n(); ++i)
        for (std::size_t p = g.adjacency.row_ptr()[i];
             p < g.adjacency.row_ptr()[i + 1]; ++p) {
            const std::size_t j = g.adjacency.col_idx()[p];
            if (j > i)
                edges << g.node_ids[i] << '\t' << g.node_ids[j] << '\n';
        }
    write_text((fs::path(opt.out) / "edges.tsv").string(), edges.str());

    std::ostringstream labels;
    for (std::size_t i = 0; i < g.n(); ++i)
        labels << g.node_ids[i] << '\t'
               << synth_label_name(opt.cfg, g.labels[i]) << '\n';
    write_text((fs::path(opt.out) / "labels.tsv").string(), labels.str());

    std::ostringstream body;
    for (const auto& doc : docs) {
        for (std::size_t t = 0; t < doc.size(); ++t) {
            if (t) body << ' ';
            body << doc[t];
        }
        body << '\n';
    }
    write_text((fs::path(opt.out) / "docs.txt").string(), body.str());

    save_node_order(g, (fs::path(opt.out) / "nodes.txt").string());

    json cfg;
    cfg["n"] = opt.cfg.n;
    cfg["K"] = opt.cfg.num_communities;
    cfg["p-in"] = opt.cfg.p_in;
    cfg["p-out"] = opt.cfg.p_out;
    cfg["vocab"] = opt.cfg.vocab_size;
    cfg["q"] = opt.cfg.signal_q;
    cfg["doc-len"] = opt.cfg.doc_len;
    cfg["seed"] = opt.cfg.seed;
    write_json((fs::path(opt.out) / "config.json").string(), cfg);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// embed

struct EmbedCli {
    std::string edges, nodes, docs, content_matrix, labels, stopwords, out;
    std::string config;
    bool directed = false;
    std::size_t min_df = 1;
    long long k = 0;  // 0: use 10 * #classes from the label file
    double alpha1 = 1, alpha2 = 1, alpha3 = 1;
    double beta1 = 1, beta2 = 1, beta3 = 1;
    double gamma = 0.5;
    int order = 1;
    std::string variant = "als";
    bool line_search = false;
    std::size_t inner = 3;
    std::size_t max_outer = 100;
    double tol = 1e-4;
    std::uint64_t seed = 0;
    std::string init = "nndsvd";
};

struct EmbedInputs {
    AttributedGraph graph;
    SparseMatrix content;
    bool used_docs = false;
};

EmbedInputs load_embed_inputs(const EmbedCli& opt) {
    if (opt.edges.empty()) throw ParamError("--edges is required");
    if (opt.docs.empty() == opt.content_matrix.empty())
        throw ParamError("exactly one of --docs / --content-matrix required");

    EmbedInputs in;
    std::vector<std::string> order;
    if (!opt.nodes.empty()) order = load_node_order(opt.nodes);
    in.graph = load_edge_list(opt.edges, opt.directed, 1.0, order);
    if (in.graph.self_loops_dropped > 0)
        std::cerr << "warning: dropped " << in.graph.self_loops_dropped
                  << " self-loop(s)\n";
    if (!opt.labels.empty()) load_labels(opt.labels, in.graph);

    if (!opt.docs.empty()) {
        TokenDocs docs = load_documents(opt.docs);
        if (docs.size() != in.graph.n())
            throw ValidationError(
                "documents file has " + std::to_string(docs.size()) +
                " lines but the graph has " + std::to_string(in.graph.n()) +
                " nodes");
        std::set<std::string> stop;
        const std::set<std::string>* stop_ptr = nullptr;
        if (!opt.stopwords.empty()) {
            stop = load_stopwords(opt.stopwords);
            stop_ptr = &stop;
        }
        Vocabulary vocab = build_vocabulary(docs, stop_ptr, opt.min_df);
        in.content = tfidf(docs, vocab).matrix;
        in.used_docs = true;
    } else {
        in.content =
            load_content_matrix(opt.content_matrix, in.graph.n()).matrix;
    }
    return in;
}

Hyperparams make_hyperparams(const EmbedCli& opt, const EmbedInputs& in) {
    Hyperparams hp;
    hp.alpha1 = opt.alpha1;
    hp.alpha2 = opt.alpha2;
    hp.alpha3 = opt.alpha3;
    hp.beta1 = opt.beta1;
    hp.beta2 = opt.beta2;
    hp.beta3 = opt.beta3;
    hp.gamma = opt.gamma;
    hp.m_order = opt.order;
    hp.inner_iters = opt.inner;
    hp.max_outer = opt.max_outer;
    hp.rel_tol = opt.tol;
    hp.variant = variant_from_string(opt.variant);
    hp.line_search = opt.line_search;
    hp.seed = opt.seed;
    hp.init = init_from_string(opt.init);
    if (opt.k > 0) {
        hp.k = static_cast<std::size_t>(opt.k);
    } else if (in.graph.has_labels()) {
        hp.k = 10 * static_cast<std::size_t>(in.graph.num_classes);
    } else {
        throw ParamError("--k is required when no label file is given");
    }
    hp.validate(in.graph.n(), in.content.cols());
    return hp;
}

json embed_meta(const EmbedCli& opt, const EmbedInputs& in,
                const Hyperparams& hp, const RunResult& run) {
    json meta;
    meta["artifact"] = "fscnmf";
    meta["version"] = kArtifactVersion;
    meta["k"] = hp.k;
    meta["alpha1"] = hp.alpha1;
    meta["alpha2"] = hp.alpha2;
    meta["alpha3"] = hp.alpha3;
    meta["beta1"] = hp.beta1;
    meta["beta2"] = hp.beta2;
    meta["beta3"] = hp.beta3;
    meta["gamma"] = hp.gamma;
    meta["order"] = hp.m_order;
    meta["variant"] = to_string(hp.variant);
    meta["line-search"] = hp.line_search;
    meta["inner"] = hp.inner_iters;
    meta["max-outer"] = hp.max_outer;
    meta["tol"] = hp.rel_tol;
    meta["seed"] = hp.seed;
    meta["init"] = to_string(hp.init);
    meta["directed"] = opt.directed;
    meta["min-df"] = opt.min_df;
    // Top-level input paths mirror the flags, so this file can be fed back
    // through --config to re-run the experiment.
    if (!opt.edges.empty()) meta["edges"] = opt.edges;
    if (!opt.nodes.empty()) meta["nodes"] = opt.nodes;
    if (!opt.docs.empty()) meta["docs"] = opt.docs;
    if (!opt.content_matrix.empty())
        meta["content-matrix"] = opt.content_matrix;
    if (!opt.labels.empty()) meta["labels"] = opt.labels;
    if (!opt.stopwords.empty()) meta["stopwords"] = opt.stopwords;
    meta["n"] = in.graph.n();
    meta["d"] = in.content.cols();
    if (in.used_docs) meta["tfidf-variant"] = kTfidfVariant;
    json inputs;
    auto add_input = [&](const char* key, const std::string& path) {
        if (path.empty()) return;
        inputs[key] = {{"path", path}, {"checksum", file_checksum(path)}};
    };
    add_input("edges", opt.edges);
    add_input("nodes", opt.nodes);
    add_input("docs", opt.docs);
    add_input("content-matrix", opt.content_matrix);
    add_input("labels", opt.labels);
    add_input("stopwords", opt.stopwords);
    meta["inputs"] = inputs;
    meta["outer-iterations"] = run.outer_seconds.size();
    meta["final-d1"] = run.trace.rows.back().d1;
    meta["final-d2"] = run.trace.rows.back().d2;
    return meta;
}

int run_embed(const EmbedCli& opt) {
    if (opt.out.empty()) throw ParamError("--out is required");
    EmbedInputs in = load_embed_inputs(opt);
    Hyperparams hp = make_hyperparams(opt, in);
    ensure_out_dir(opt.out);

    ProximityMatrix prox = proximity_matrix(in.graph, hp.m_order);
    RunResult run;
    try {
        run = run_fscnmf(prox.matrix, in.content, hp);
    } catch (const NumericalError& e) {
        write_cost_trace_csv((fs::path(opt.out) / "trace.csv").string(),
                             e.trace);
        std::cerr << "numerical failure: " << e.what()
                  << " (trace flushed)\n";
        return kExitNumerical;
    }
    Embedding emb = combine(run.state.b1, run.state.u, hp.gamma);
    emb.variant = hp.variant;
    emb.m_order = hp.m_order;
    emb.seed = hp.seed;

    const fs::path out(opt.out);
    write_embedding_tsv((out / "embedding.tsv").string(), in.graph.node_ids,
                        emb.matrix);
    write_embedding_tsv((out / "b1.tsv").string(), in.graph.node_ids,
                        run.state.b1);
    write_embedding_tsv((out / "u.tsv").string(), in.graph.node_ids,
                        run.state.u);
    write_cost_trace_csv((out / "trace.csv").string(), run.trace);
    save_node_order(in.graph, (out / "nodes.txt").string());
    write_json((out / "meta.json").string(), embed_meta(opt, in, hp, run));
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalCli {
    std::string embedding, labels, out, task, config;
    long long clusters = 0;  // --K; 0 means #classes from labels
    double train_fraction = 0.5;
    std::size_t knn = 5;
    std::uint64_t seed = 0;
};

std::vector<int> labels_for_embedding(const std::string& labels_path,
                                      const std::vector<std::string>& ids,
                                      int* num_classes) {
    std::ifstream in(labels_path);
    if (!in) throw IoError("cannot open label file " + labels_path);
    std::unordered_map<std::string, std::string> by_id;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string id, label;
        if (!(ss >> id >> label))
            throw ParseError(labels_path + ":" + std::to_string(lineno) +
                             ": expected node_id<TAB>label");
        by_id[id] = label;
    }
    std::vector<std::string> raw;
    raw.reserve(ids.size());
    for (const std::string& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw ValidationError("node '" + id + "' has no label in " +
                                  labels_path);
        raw.push_back(it->second);
    }
    auto [dense, k] = densify_labels(raw);
    if (num_classes) *num_classes = k;
    return dense;
}

int run_eval(const EvalCli& opt) {
    if (opt.embedding.empty()) throw ParamError("--embedding is required");
    if (opt.task != "cluster" && opt.task != "classify")
        throw ParamError("--task must be cluster or classify");
    LoadedEmbedding emb = read_embedding_tsv(opt.embedding);

    std::vector<int> labels;
    int num_classes = 0;
    if (!opt.labels.empty())
        labels = labels_for_embedding(opt.labels, emb.node_ids, &num_classes);

    json report;
    std::string tsv;
    if (opt.task == "cluster") {
        std::size_t k = 0;
        if (opt.clusters > 0)
            k = static_cast<std::size_t>(opt.clusters);
        else if (!labels.empty())
            k = static_cast<std::size_t>(num_classes);
        else
            throw ParamError("cluster task needs --K or --labels");
        ClusteringResult r = kmeans(emb.matrix, k, opt.seed);
        if (!labels.empty())
            r.accuracy = unsup_accuracy(r.assignments, labels);
        report["task"] = "cluster";
        report["seed"] = opt.seed;
        report["K"] = k;
        report["n"] = emb.matrix.rows();
        report["dim"] = emb.matrix.cols();
        report["embedding"] = opt.embedding;
        report["inertia"] = r.inertia;
        if (r.accuracy) report["accuracy"] = *r.accuracy;
        char buf[96];
        std::snprintf(buf, sizeof buf, "%.17g", r.inertia);
        std::ostringstream ss;
        ss << "cluster\t" << opt.seed << '\t' << k << '\t' << buf;
        if (r.accuracy) {
            std::snprintf(buf, sizeof buf, "%.17g", *r.accuracy);
            ss << '\t' << buf << '\n';
        } else {
            ss << "\tNA\n";
        }
        tsv = ss.str();
    } else {
        if (labels.empty())
            throw ParamError("classify task needs --labels");
        auto [train_idx, test_idx] =
            stratified_split(labels, opt.train_fraction, opt.seed);
        auto slice = [&](const std::vector<std::size_t>& idx) {
            DenseMatrix x(idx.size(), emb.matrix.cols());
            std::vector<int> y(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                for (std::size_t j = 0; j < emb.matrix.cols(); ++j)
                    x(i, j) = emb.matrix(idx[i], j);
                y[i] = labels[idx[i]];
            }
            return std::make_pair(std::move(x), std::move(y));
        };
        auto [train_x, train_y] = slice(train_idx);
        auto [test_x, test_y] = slice(test_idx);
        std::vector<int> pred =
            knn_classify(train_x, train_y, test_x, opt.knn);
        ClassificationReport r = f1_scores(pred, test_y);
        r.train_fraction = opt.train_fraction;
        report["task"] = "classify";
        report["seed"] = opt.seed;
        report["train-fraction"] = opt.train_fraction;
        report["knn"] = opt.knn;
        report["embedding"] = opt.embedding;
        report["macro-f1"] = r.macro_f1;
        report["micro-f1"] = r.micro_f1;
        json per = json::array();
        for (const auto& pc : r.per_class)
            per.push_back({{"label", pc.label},
                           {"precision", pc.precision},
                           {"recall", pc.recall},
                           {"f1", pc.f1},
                           {"support", pc.support}});
        report["per-class"] = per;
        char buf[96];
        std::ostringstream ss;
        ss << "classify\t" << opt.seed << '\t' << opt.train_fraction << '\t'
           << opt.knn;
        std::snprintf(buf, sizeof buf, "%.17g\t%.17g", r.macro_f1,
                      r.micro_f1);
        ss << '\t' << buf << '\n';
        tsv = ss.str();
    }
    std::cout << report.dump(2) << '\n';
    if (!opt.out.empty()) {
        ensure_out_dir(opt.out);
        write_json((fs::path(opt.out) / "report.json").string(), report);
        write_text((fs::path(opt.out) / "report.tsv").string(), tsv);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepCli {
    EmbedCli base;
    std::string sweep;  // gamma | order | alpha1-beta1
    std::string grid;   // comma-separated values, or a:b pairs
    long long clusters = 0;
    std::uint64_t eval_seed = 0;
};

struct SweepPoint {
    double gamma;
    int order;
    double alpha1;
    double beta1;
};

std::vector<SweepPoint> parse_grid(const SweepCli& opt,
                                   const Hyperparams& base) {
    std::vector<SweepPoint> points;
    std::stringstream ss(opt.grid);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        SweepPoint p{base.gamma, base.m_order, base.alpha1, base.beta1};
        try {
            if (opt.sweep == "gamma") {
                p.gamma = std::stod(item);
            } else if (opt.sweep == "order") {
                p.order = std::stoi(item);
            } else if (opt.sweep == "alpha1-beta1") {
                const auto colon = item.find(':');
                if (colon == std::string::npos)
                    throw ParamError("alpha1-beta1 grid items look like a:b");
                p.alpha1 = std::stod(item.substr(0, colon));
                p.beta1 = std::stod(item.substr(colon + 1));
            } else {
                throw ParamError(
                    "--sweep must be gamma, order, or alpha1-beta1");
            }
        } catch (const std::invalid_argument&) {
            throw ParamError("bad grid value '" + item + "'");
        } catch (const std::out_of_range&) {
            throw ParamError("bad grid value '" + item + "'");
        }
        points.push_back(p);
    }
    if (points.empty()) throw ParamError("empty sweep grid");
    std::stable_sort(points.begin(), points.end(),
                     [&](const SweepPoint& a, const SweepPoint& b) {
                         if (opt.sweep == "gamma") return a.gamma < b.gamma;
                         if (opt.sweep == "order") return a.order < b.order;
                         return a.alpha1 != b.alpha1 ? a.alpha1 < b.alpha1
                                                     : a.beta1 < b.beta1;
                     });
    return points;
}

int run_sweep(const SweepCli& opt) {
    if (opt.base.out.empty()) throw ParamError("--out is required");
    if (opt.base.labels.empty())
        throw ParamError("sweep needs --labels for accuracy");
    EmbedInputs in = load_embed_inputs(opt.base);
    Hyperparams base = make_hyperparams(opt.base, in);
    std::vector<SweepPoint> grid = parse_grid(opt, base);
    ensure_out_dir(opt.base.out);

    const std::size_t k_clusters =
        opt.clusters > 0 ? static_cast<std::size_t>(opt.clusters)
                         : static_cast<std::size_t>(in.graph.num_classes);

    std::ostringstream tsv;
    tsv << "gamma\torder\talpha1\tbeta1\taccuracy\n";
    char buf[128];
    for (const SweepPoint& point : grid) {
        Hyperparams hp = base;
        hp.gamma = point.gamma;
        hp.m_order = point.order;
        hp.alpha1 = point.alpha1;
        hp.beta1 = point.beta1;
        hp.validate(in.graph.n(), in.content.cols());
        ProximityMatrix prox = proximity_matrix(in.graph, hp.m_order);
        RunResult run = run_fscnmf(prox.matrix, in.content, hp);
        Embedding emb = combine(run.state.b1, run.state.u, hp.gamma);
        ClusteringResult r = kmeans(emb.matrix, k_clusters, opt.eval_seed);
        const double accuracy =
            unsup_accuracy(r.assignments, in.graph.labels);
        std::snprintf(buf, sizeof buf, "%g\t%d\t%g\t%g\t%.17g", point.gamma,
                      point.order, point.alpha1, point.beta1, accuracy);
        tsv << buf << '\n';
    }
    write_text((fs::path(opt.base.out) / "sweep.tsv").string(), tsv.str());
    std::cout << tsv.str();
    return kExitOk;
}

// ---------------------------------------------------------------------------

void add_embed_options(CLI::App* cmd, EmbedCli& opt, ConfigBinder& binder) {
    auto bind = [&](CLI::Option* o, auto& target) { binder.bind(o, target); };
    bind(cmd->add_option("--edges", opt.edges, "edge list file"), opt.edges);
    bind(cmd->add_option("--nodes", opt.nodes,
                         "node-order file pinning node indices"),
         opt.nodes);
    bind(cmd->add_option("--docs", opt.docs,
                         "documents file (line i = node i)"),
         opt.docs);
    bind(cmd->add_option("--content-matrix", opt.content_matrix,
                         "precomputed sparse content matrix"),
         opt.content_matrix);
    bind(cmd->add_option("--labels", opt.labels, "node labels file"),
         opt.labels);
    bind(cmd->add_option("--stopwords", opt.stopwords, "stopword list"),
         opt.stopwords);
    bind(cmd->add_option("--out", opt.out, "output directory"), opt.out);
    bind(cmd->add_flag("--directed", opt.directed, "treat edges as directed"),
         opt.directed);
    bind(cmd->add_option("--min-df", opt.min_df,
                         "minimum document frequency for vocabulary"),
         opt.min_df);
    bind(cmd->add_option("--k", opt.k,
                         "embedding dimension (default 10 * #classes)"),
         opt.k);
    bind(cmd->add_option("--alpha1", opt.alpha1, "weight of ||B1-U||^2"),
         opt.alpha1);
    bind(cmd->add_option("--alpha2", opt.alpha2, "ridge on B1"), opt.alpha2);
    bind(cmd->add_option("--alpha3", opt.alpha3, "ridge on B2"), opt.alpha3);
    bind(cmd->add_option("--beta1", opt.beta1, "weight of ||U-B1||^2"),
         opt.beta1);
    bind(cmd->add_option("--beta2", opt.beta2, "ridge on U"), opt.beta2);
    bind(cmd->add_option("--beta3", opt.beta3, "ridge on V"), opt.beta3);
    bind(cmd->add_option("--gamma", opt.gamma,
                         "final blend gamma*B1 + (1-gamma)*U"),
         opt.gamma);
    bind(cmd->add_option("--order", opt.order, "proximity order m"),
         opt.order);
    bind(cmd->add_option("--variant", opt.variant, "als | mult | mult-l1"),
         opt.variant);
    bind(cmd->add_flag("--line-search", opt.line_search,
                       "damped multiplicative steps"),
         opt.line_search);
    bind(cmd->add_option("--inner", opt.inner, "inner iterations per phase"),
         opt.inner);
    bind(cmd->add_option("--max-outer", opt.max_outer,
                         "maximum outer iterations"),
         opt.max_outer);
    bind(cmd->add_option("--tol", opt.tol,
                         "relative D1+D2 change for termination"),
         opt.tol);
    bind(cmd->add_option("--seed", opt.seed, "random seed"), opt.seed);
    bind(cmd->add_option("--init", opt.init, "nndsvd | random"), opt.init);
    cmd->add_option("--config", opt.config,
                    "JSON config; command-line flags win");
}

int dispatch(int argc, char** argv) {
    CLI::App app{"FSCNMF attributed-network embedding toolkit"};
    app.require_subcommand(1);

    SynthCli synth;
    ConfigBinder synth_binder;
    CLI::App* synth_cmd = app.add_subcommand(
        "synth", "generate a planted-partition benchmark instance");
    {
        auto bind = [&](CLI::Option* o, auto& t) { synth_binder.bind(o, t); };
        bind(synth_cmd->add_option("--n", synth.cfg.n, "node count"),
             synth.cfg.n);
        bind(synth_cmd->add_option("--K", synth.cfg.num_communities,
                                   "community count"),
             synth.cfg.num_communities);
        bind(synth_cmd->add_option("--p-in", synth.cfg.p_in,
                                   "within-community edge probability"),
             synth.cfg.p_in);
        bind(synth_cmd->add_option("--p-out", synth.cfg.p_out,
                                   "across-community edge probability"),
             synth.cfg.p_out);
        bind(synth_cmd->add_option("--vocab", synth.cfg.vocab_size,
                                   "vocabulary size (>= 2K)"),
             synth.cfg.vocab_size);
        bind(synth_cmd->add_option("--q", synth.cfg.signal_q,
                                   "class-token probability"),
             synth.cfg.signal_q);
        bind(synth_cmd->add_option("--doc-len", synth.cfg.doc_len,
                                   "tokens per document"),
             synth.cfg.doc_len);
        bind(synth_cmd->add_option("--seed", synth.cfg.seed, "random seed"),
             synth.cfg.seed);
        synth_cmd->add_option("--out", synth.out, "output directory")
            ->required();
        synth_cmd->add_option("--config", synth.config,
                              "JSON config; command-line flags win");
    }

    EmbedCli embed;
    ConfigBinder embed_binder;
    CLI::App* embed_cmd =
        app.add_subcommand("embed", "compute node embeddings");
    add_embed_options(embed_cmd, embed, embed_binder);

    EvalCli eval;
    ConfigBinder eval_binder;
    CLI::App* eval_cmd = app.add_subcommand(
        "eval", "evaluate an embedding by clustering or classification");
    {
        auto bind = [&](CLI::Option* o, auto& t) { eval_binder.bind(o, t); };
        bind(eval_cmd->add_option("--embedding", eval.embedding,
                                  "embedding TSV"),
             eval.embedding);
        bind(eval_cmd->add_option("--labels", eval.labels, "labels file"),
             eval.labels);
        bind(eval_cmd->add_option("--task", eval.task, "cluster | classify"),
             eval.task);
        bind(eval_cmd->add_option("--K", eval.clusters,
                                  "cluster count (default #classes)"),
             eval.clusters);
        bind(eval_cmd->add_option("--train-fraction", eval.train_fraction,
                                  "training fraction for classify"),
             eval.train_fraction);
        bind(eval_cmd->add_option("--knn", eval.knn,
                                  "neighbors for classify"),
             eval.knn);
        bind(eval_cmd->add_option("--seed", eval.seed, "random seed"),
             eval.seed);
        bind(eval_cmd->add_option("--out", eval.out,
                                  "directory for report.json / report.tsv"),
             eval.out);
        eval_cmd->add_option("--config", eval.config,
                             "JSON config; command-line flags win");
    }

    SweepCli sweep;
    ConfigBinder sweep_binder;
    CLI::App* sweep_cmd = app.add_subcommand(
        "sweep", "embed+eval over a parameter grid, one TSV row per point");
    add_embed_options(sweep_cmd, sweep.base, sweep_binder);
    {
        auto bind = [&](CLI::Option* o, auto& t) { sweep_binder.bind(o, t); };
        bind(sweep_cmd->add_option("--sweep", sweep.sweep,
                                   "gamma | order | alpha1-beta1"),
             sweep.sweep);
        bind(sweep_cmd->add_option(
                 "--grid", sweep.grid,
                 "comma-separated values (a:b pairs for alpha1-beta1)"),
             sweep.grid);
        bind(sweep_cmd->add_option("--K", sweep.clusters,
                                   "cluster count (default #classes)"),
             sweep.clusters);
        bind(sweep_cmd->add_option("--eval-seed", sweep.eval_seed,
                                   "seed for the clustering step"),
             sweep.eval_seed);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (synth_cmd->parsed()) {
        synth_binder.apply(synth.config);
        return run_synth(synth);
    }
    if (embed_cmd->parsed()) {
        embed_binder.apply(embed.config);
        return run_embed(embed);
    }
    if (eval_cmd->parsed()) {
        eval_binder.apply(eval.config);
        return run_eval(eval);
    }
    sweep_binder.apply(sweep.base.config);
    return run_sweep(sweep);
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const SingularMatrixError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const ConvergenceError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}
