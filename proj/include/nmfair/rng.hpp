#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>

namespace nmfair {

/// Deterministic 64-bit random stream (splitmix64).
///
/// The standard <random> engines are portable but the distributions are not
/// (std::uniform_real_distribution is implementation-defined), so rollouts
/// seeded with the same value could differ across toolchains. This generator
/// owns both the stream and the conversions, which keeps every sampled
/// trajectory bit-identical for a given seed on any platform.
///
/// Streams are splittable: `split(i)` derives an independent substream from
/// the origin seed and the stream index, so parallel rollouts are reproducible
/// regardless of scheduling.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : origin_(seed), state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 bits of entropy.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform index in [0, n). n must be positive.
    std::size_t next_index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::next_index: n must be positive");
        // Multiply-shift bound; bias is negligible for desk-scale n.
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Independent substream derived from the origin seed and `stream`.
    /// Does not advance this generator.
    Rng split(std::uint64_t stream) const {
        std::uint64_t z = origin_ ^ (0xD1B54A32D192ED03ull * (stream + 1));
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        z ^= z >> 31;
        return Rng(z);
    }

    std::uint64_t origin() const { return origin_; }

private:
    std::uint64_t origin_;
    std::uint64_t state_;
};

/// Samples an index from a categorical distribution given as probabilities.
/// The weights are expected to sum to 1 (validated upstream); float slack at
/// the tail falls back to the last positive entry.
inline std::size_t sample_categorical(Rng& rng, std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("sample_categorical: empty distribution");
    const double u = rng.next_double();
    double cum = 0.0;
    std::size_t last_positive = probs.size();
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > 0.0) {
            cum += probs[i];
            last_positive = i;
            if (u < cum) return i;
        }
    }
    if (last_positive == probs.size())
        throw std::invalid_argument("sample_categorical: no positive mass");
    return last_positive;
}

} // namespace nmfair
