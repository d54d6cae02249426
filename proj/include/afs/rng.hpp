#pragma once

#include <cstdint>
#include <string_view>

namespace afs {

/// Deterministic 64-bit random source (splitmix64). The same seed yields the
/// same stream on every platform. Child streams are derived from the original
/// seed, never from the draw position, so forking component A's stream can
/// never shift component B's draws.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    /// Uniform in [0, 1), 53-bit resolution.
    double next_uniform();

    /// Uniform in [lo, hi).
    double next_uniform(double lo, double hi);

    /// Standard normal via Box-Muller; consumes two uniforms per call.
    double next_normal();

    /// Independent child stream for a numbered substream (e.g. sample index).
    SeededRng fork(std::uint64_t stream) const;

    /// Independent child stream for a named component ("bank", "merger", ...).
    SeededRng fork(std::string_view name) const;

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

/// FNV-1a hash, used by the documented seed-splitting rule.
std::uint64_t fnv1a64(std::string_view s);

}  // namespace afs
