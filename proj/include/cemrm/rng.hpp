#pragma once

#include <cstdint>
#include <cmath>

namespace cemrm {

// SplitMix64 step (Steele, Lea, Flood 2014). One 64-bit state word in, one
// well-mixed 64-bit value out.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic random stream. All randomness in the project flows through
// seeds derived from a single master seed (see derive_seed), so there is no
// global RNG state to checkpoint: resuming a run re-derives the streams from
// the iteration counters.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // unbiased integer in [0, n), n >= 1
    std::uint64_t bounded(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // standard normal via Box-Muller (cosine branch only, so the stream is
    // stateless between calls)
    double normal() {
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::uint64_t state_;
};

// Named sub-streams. Each (stream, counter) pair gets a statistically
// independent seed, which keeps parallel evaluation order from mattering.
enum class Stream : std::uint64_t {
    population = 1,
    split = 2,
    batch = 3,
    record_choice = 4,
    impulse = 5,
    model_init = 6,
    evaluate = 7,
    final_eval = 8,
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t s = master;
    (void)splitmix64(s);
    s ^= static_cast<std::uint64_t>(stream) * 0xda942042e4dd58b5ULL;
    (void)splitmix64(s);
    s ^= a * 0xca01f9dd5dce6addULL;
    (void)splitmix64(s);
    s ^= b * 0x9fb21c651e98df25ULL;
    std::uint64_t out = splitmix64(s);
    return out;
}

}  // namespace cemrm
