#include "fscnmf/content.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

namespace fscnmf {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    const std::size_t len = line.size();
    while (i < len) {
        while (i < len && std::isspace(static_cast<unsigned char>(line[i])))
            ++i;
        std::size_t start = i;
        while (i < len && !std::isspace(static_cast<unsigned char>(line[i])))
            ++i;
        if (i == start) continue;
        std::size_t lo = start, hi = i;
        while (lo < hi && std::ispunct(static_cast<unsigned char>(line[lo])))
            ++lo;
        while (hi > lo &&
               std::ispunct(static_cast<unsigned char>(line[hi - 1])))
            --hi;
        if (lo == hi) continue;
        std::string tok;
        tok.reserve(hi - lo);
        for (std::size_t p = lo; p < hi; ++p)
            tok.push_back(static_cast<char>(
                std::tolower(static_cast<unsigned char>(line[p]))));
        out.push_back(std::move(tok));
    }
    return out;
}

Vocabulary build_vocabulary(const TokenDocs& docs,
                            const std::set<std::string>* stopwords,
                            std::size_t min_df) {
    if (docs.empty()) throw ValidationError("empty corpus");
    if (min_df < 1) throw ParamError("min_df must be >= 1");
    std::map<std::string, std::size_t> df;  // ordered: lexicographic terms
    std::set<std::string> in_doc;
    for (const auto& doc : docs) {
        in_doc.clear();
        for (const std::string& tok : doc) {
            if (stopwords && stopwords->count(tok)) continue;
            in_doc.insert(tok);
        }
        for (const std::string& tok : in_doc) ++df[tok];
    }
    Vocabulary vocab;
    for (const auto& [term, freq] : df) {
        if (freq < min_df) continue;
        vocab.terms.push_back(term);
        vocab.doc_freq.push_back(freq);
    }
    return vocab;
}

ContentMatrix tfidf(const TokenDocs& docs, const Vocabulary& vocab) {
    const std::size_t n = docs.size();
    const std::size_t d = vocab.terms.size();
    std::unordered_map<std::string, std::size_t> term_index;
    term_index.reserve(d);
    for (std::size_t t = 0; t < d; ++t) term_index.emplace(vocab.terms[t], t);

    std::vector<double> idf(d);
    for (std::size_t t = 0; t < d; ++t)
        idf[t] = std::log(static_cast<double>(n) /
                          static_cast<double>(vocab.doc_freq[t]));

    std::vector<Triplet> entries;
    std::map<std::size_t, std::size_t> counts;  // term index -> raw count
    for (std::size_t i = 0; i < n; ++i) {
        counts.clear();
        for (const std::string& tok : docs[i]) {
            auto it = term_index.find(tok);
            if (it != term_index.end()) ++counts[it->second];
        }
        for (const auto& [t, count] : counts) {
            const double w = static_cast<double>(count) * idf[t];
            if (w != 0.0) entries.push_back({i, t, w});
        }
    }
    ContentMatrix out;
    out.matrix = SparseMatrix(n, d, std::move(entries));
    out.vocab = vocab;
    return out;
}

ContentMatrix load_content_matrix(const std::string& path, std::size_t n) {
    SparseMatrix m = load_sparse_text(path);
    if (m.rows() != n)
        throw ShapeError("content matrix " + path + " has " +
                         std::to_string(m.rows()) + " rows, expected " +
                         std::to_string(n));
    for (double v : m.values())
        if (v < 0.0)
            throw ValidationError("content matrix " + path +
                                  " has a negative entry");
    ContentMatrix out;
    out.matrix = std::move(m);
    return out;
}

TokenDocs load_documents(const std::string& path,
                         const TokenTransform& transform) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open documents file " + path);
    TokenDocs docs;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> tokens = tokenize(line);
        if (transform) {
            std::vector<std::string> rewritten;
            rewritten.reserve(tokens.size());
            for (std::string& tok : tokens) {
                std::string out = transform(tok);
                if (!out.empty()) rewritten.push_back(std::move(out));
            }
            tokens = std::move(rewritten);
        }
        docs.push_back(std::move(tokens));
    }
    return docs;
}

std::set<std::string> load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open stopwords file " + path);
    std::set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        words.insert(line);
    }
    return words;
}

}  // namespace fscnmf
