#ifndef GRIDTRACE_RNG_HPP
#define GRIDTRACE_RNG_HPP

#include <cstdint>

namespace gridtrace {

// Small-state deterministic generator: xoshiro256** seeded via splitmix64.
// Identical seed => identical draw sequence, independent of platform.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& s : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            s = z ^ (z >> 31);
        }
    }

    // Derive an independent stream for a subsystem without sharing state.
    Rng stream(uint64_t tag) const {
        return Rng(state_[0] ^ (tag * 0x9e3779b97f4a7c15ULL));
    }

    uint64_t next() {
        uint64_t result = rotl(state_[1] * 5, 7) * 9;
        uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, n)
    uint64_t below(uint64_t n) { return n ? next() % n : 0; }

    // Uniform double in [0, 1)
    double uniform() { return (next() >> 11) * (1.0 / 9007199254740992.0); }

    bool coin() { return (next() & 1) != 0; }

private:
    static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }
    uint64_t state_[4];
};

}  // namespace gridtrace

#endif
