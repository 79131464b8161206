#ifndef FSCNMF_RNG_HPP
#define FSCNMF_RNG_HPP

#include <cstdint>
#include <cstddef>
#include <vector>

namespace fscnmf {

// splitmix64, used to expand a user seed into generator state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derive an independent stream seed from (seed, stream). Used so that, e.g.,
// graph sampling and document sampling of one synthetic instance do not share
// a stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed + 0x632be59bd9b4e019ULL * (stream + 1);
    return splitmix64(s);
}

// xoshiro256** by Blackman & Vigna, seeded via splitmix64. Chosen over the
// standard-library engines because its output sequence is fully specified,
// so every seeded artifact is reproducible across platforms and compilers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Uniform integer in [0, bound); unbiased via rejection.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit =
            UINT64_MAX - UINT64_MAX % bound;  // multiple of bound
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return r % bound;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t state_[4];
};

// Fisher-Yates; std::shuffle is not used anywhere because its consumption of
// generator output is implementation-defined.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
        std::swap(items[i], items[j]);
    }
}

}  // namespace fscnmf

#endif
