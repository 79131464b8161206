#ifndef FSCNMF_CONTENT_HPP
#define FSCNMF_CONTENT_HPP

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "fscnmf/linalg.hpp"

namespace fscnmf {

using TokenDocs = std::vector<std::vector<std::string>>;

/// Optional per-token rewrite applied after tokenization (a stemmer slot);
/// returning an empty string drops the token.
using TokenTransform = std::function<std::string(const std::string&)>;

struct Vocabulary {
    std::vector<std::string> terms;      // unique, lexicographically sorted
    std::vector<std::size_t> doc_freq;   // aligned with terms
};

/// n x d tf-idf matrix over a vocabulary. Weighting is raw term count times
/// ln(n/df), unsmoothed, with no row normalization; the variant string is
/// recorded in run metadata so downstream results are self-describing.
struct ContentMatrix {
    SparseMatrix matrix;  // n x d, entries >= 0
    Vocabulary vocab;     // empty when the matrix was loaded precomputed
};

inline constexpr const char* kTfidfVariant =
    "count*ln(n/df), unsmoothed, no row normalization";

/// Retains tokens outside `stopwords` whose document frequency is at least
/// min_df; terms come back lexicographically sorted.
Vocabulary build_vocabulary(const TokenDocs& docs,
                            const std::set<std::string>* stopwords,
                            std::size_t min_df);

ContentMatrix tfidf(const TokenDocs& docs, const Vocabulary& vocab);

/// Load a precomputed content matrix in the sparse text format; must have
/// exactly n rows and no negative entries.
ContentMatrix load_content_matrix(const std::string& path, std::size_t n);

/// Whitespace split, ASCII lowercased, punctuation stripped from token edges.
std::vector<std::string> tokenize(const std::string& line);

/// One document per line; line i belongs to node index i.
TokenDocs load_documents(const std::string& path,
                         const TokenTransform& transform = nullptr);

std::set<std::string> load_stopwords(const std::string& path);

}  // namespace fscnmf

#endif
