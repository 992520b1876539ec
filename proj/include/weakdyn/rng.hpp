#pragma once

// Counter-based random number generation. Every draw is a pure function of
// (seed, counter indices), so datasets and Monte-Carlo cells are reproducible
// regardless of evaluation order or threading.

#include <cmath>
#include <cstdint>

namespace weakdyn::rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash4(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                           std::uint64_t c) {
    std::uint64_t h = mix64(seed ^ 0x2545f4914f6cdd1dULL);
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    return h;
}

// Uniform in (0,1), never exactly 0 or 1.
inline double uniform01(std::uint64_t h) {
    return static_cast<double>(h >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

// Standard normal keyed by (seed, a, b, c) via Box-Muller.
inline double normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                     std::uint64_t c = 0) {
    const double u1 = uniform01(hash4(seed, a, b, c));
    const double u2 = uniform01(hash4(seed ^ 0x9e3779b97f4a7c15ULL, a, b, c));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

// Uniform in [lo, hi) keyed by (seed, a, b, c).
inline double uniform(double lo, double hi, std::uint64_t seed, std::uint64_t a,
                      std::uint64_t b = 0, std::uint64_t c = 0) {
    return lo + (hi - lo) * uniform01(hash4(seed, a, b, c));
}

// Sequential view over a counter stream; draw(i) is independent of draws at
// other indices, so refining a time grid keeps earlier indices unchanged.
class Stream {
public:
    explicit Stream(std::uint64_t seed, std::uint64_t substream = 0)
        : seed_(seed), sub_(substream) {}

    double normal(std::uint64_t index) const { return rng::normal(seed_, sub_, index); }
    double uniform(double lo, double hi, std::uint64_t index) const {
        return rng::uniform(lo, hi, seed_, sub_, index);
    }
    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t sub_;
};

} // namespace weakdyn::rng
