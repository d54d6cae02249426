#include "afs/rng.hpp"

#include <cmath>
#include <numbers>

namespace afs {

namespace {

// splitmix64 finalizer (Steele, Lea, Flood; public-domain constants).
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t SeededRng::next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double SeededRng::next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_uniform();
}

double SeededRng::next_normal() {
    // Box-Muller; u1 nudged away from zero so log() stays finite.
    double u1 = next_uniform();
    double u2 = next_uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SeededRng SeededRng::fork(std::uint64_t stream) const {
    return SeededRng(mix64(seed_ ^ mix64(stream ^ 0xD1B54A32D192ED03ull)));
}

SeededRng SeededRng::fork(std::string_view name) const {
    return SeededRng(mix64(seed_ ^ fnv1a64(name)));
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace afs
