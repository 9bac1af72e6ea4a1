#include "momenta/rng.hpp"

#include <cmath>

namespace momenta {

uint64_t hash_bytes(std::string_view bytes, uint64_t seed) {
    uint64_t h = 14695981039346656037ull ^ splitmix64(seed);
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return splitmix64(h);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

uint64_t Rng::below(uint64_t n) {
    // Rejection sampling over the top of the range to avoid modulo bias.
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

}  // namespace momenta
