#pragma once

#include <cstdint>
#include <cstddef>
#include <string_view>
#include <vector>

namespace momenta {

// splitmix64 finalizer. Used both as the mixing step of Rng and as a cheap
// avalanche for hash values.
constexpr uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// FNV-1a over the bytes, folded with the seed and finalized with splitmix64.
uint64_t hash_bytes(std::string_view bytes, uint64_t seed = 0);

// Derive an independent stream key from a base seed and a label, so adding or
// removing one consumer does not shift the draws of another.
inline uint64_t derive_key(uint64_t seed, std::string_view label) {
    return hash_bytes(label, splitmix64(seed));
}

// Counter-based deterministic generator. Output i is a pure function of
// (key, i); the implementation is portable and identical on every platform,
// unlike the distributions in <random>.
class Rng {
public:
    explicit Rng(uint64_t key) : state_(key) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; the spare value is cached.
    double normal();

    // Unbiased integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace momenta
