#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace skillforge {

// PCG32 (pcg_oneseq variant of O'Neill's PCG XSH-RR 64/32).
//
// All randomness in this project flows through this generator so that every
// resample vector, task stream and outcome draw is reproducible from (seed,
// stream) alone, on any platform:
//
//   state' = state * 6364136223846793005 + inc
//   output = rotr32((state ^ (state >> 18)) >> 27, state >> 59)
//
// Streaming: stream id s selects the increment inc = 2*s + 1 (any odd value
// gives a distinct full-period sequence). Seeding follows the reference
// implementation: zero state, one advance, add seed, one advance.
//
// bounded(n) uses the classic threshold-rejection method (threshold =
// (2^32 - n) mod n), so draws are exactly uniform over [0, n).
class pcg32 {
public:
    explicit pcg32(uint64_t seed, uint64_t stream = 0) : state_(0), inc_((stream << 1u) | 1u) {
        next();
        state_ += seed;
        next();
    }

    uint32_t next() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    uint32_t bounded(uint32_t n) {
        if (n < 2) return 0;
        uint32_t threshold = (0u - n) % n;
        for (;;) {
            uint32_t r = next();
            if (r >= threshold) return r % n;
        }
    }

    // Uniform double in [0, 1) with 32 bits of resolution.
    double uniform() { return next() * (1.0 / 4294967296.0); }

    bool bernoulli(double p) { return uniform() < p; }

private:
    uint64_t state_;
    uint64_t inc_;
};

// FNV-1a, used for deterministic content hashes (prompt prefix identity).
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 14695981039346656037ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = 14695981039346656037ULL) {
    return fnv1a(s.data(), s.size(), h);
}

} // namespace skillforge
