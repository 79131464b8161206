#ifndef FSCNMF_TESTS_SUPPORT_HPP
#define FSCNMF_TESTS_SUPPORT_HPP

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fscnmf/linalg.hpp"
#include "fscnmf/rng.hpp"

namespace testsupport {

inline double max_abs_diff(const fscnmf::DenseMatrix& a,
                           const fscnmf::DenseMatrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

inline fscnmf::DenseMatrix make_dense(
    std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = rows.begin()->size();
    fscnmf::DenseMatrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

inline fscnmf::DenseMatrix random_dense(std::size_t r, std::size_t c,
                                        fscnmf::Rng& rng, double lo = 0.0,
                                        double hi = 1.0) {
    fscnmf::DenseMatrix m(r, c);
    for (double& v : m.values()) v = rng.uniform(lo, hi);
    return m;
}

inline fscnmf::SparseMatrix random_sparse(std::size_t r, std::size_t c,
                                          double density, fscnmf::Rng& rng,
                                          double lo = 0.0, double hi = 1.0) {
    std::vector<fscnmf::Triplet> entries;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            if (rng.next_double() < density)
                entries.push_back({i, j, rng.uniform(lo, hi)});
    return fscnmf::SparseMatrix(r, c, std::move(entries));
}

inline fscnmf::SparseMatrix to_sparse(const fscnmf::DenseMatrix& d) {
    std::vector<fscnmf::Triplet> entries;
    for (std::size_t i = 0; i < d.rows(); ++i)
        for (std::size_t j = 0; j < d.cols(); ++j)
            if (d(i, j) != 0.0) entries.push_back({i, j, d(i, j)});
    return fscnmf::SparseMatrix(d.rows(), d.cols(), std::move(entries));
}

// Scratch directory under the current working directory; recreated fresh.
class TempDir {
public:
    explicit TempDir(const std::string& name)
        : path_(std::filesystem::current_path() / name) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const {
        return (path_ / name).string();
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

struct CommandResult {
    int exit_code;
    std::string output;  // stdout + stderr
};

inline CommandResult run_command(const std::string& cmd) {
    const std::string full = cmd + " 2>&1";
    FILE* pipe = popen(full.c_str(), "r");
    CommandResult res{-1, {}};
    if (!pipe) return res;
    char buf[4096];
    std::size_t got;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0)
        res.output.append(buf, got);
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

}  // namespace testsupport

#endif
