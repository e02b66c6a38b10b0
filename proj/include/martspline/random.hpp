#pragma once

#include <cstdint>
#include <random>

namespace martspline {

/// Seeded generator with a platform-independent real mapping.
///
/// std::uniform_real_distribution is implementation-defined, so reals are
/// taken directly from the top 53 bits of the 64-bit Mersenne twister.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// Derives independent stream seeds (per axis, per run) from a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace martspline
