#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace symdyn {

/// Deterministic uniform stream. std::mt19937_64 has a standard-mandated bit
/// sequence, and the [0,1) mapping below is fixed arithmetic, so the stream
/// is reproducible across platforms and standard library implementations
/// (std::uniform_real_distribution is not, which is why it is avoided here).
class uniform_stream {
public:
    explicit uniform_stream(std::uint64_t seed) : engine_(seed) {}

    /// Next double in [0, 1) with 53 random bits.
    double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::uint64_t next_bits() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive independent per-trial seeds from a
/// base seed without correlated low bits.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Inverse-CDF draw from a finite distribution: the smallest category whose
/// cumulative probability exceeds u. Shared by the generator and the coupled
/// simulator so that equal rows map equal uniforms to equal symbols.
inline std::size_t sample_category(std::span<const double> probs, double u) {
    double cum = 0.0;
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
        cum += probs[k];
        if (u < cum) return k;
    }
    return probs.empty() ? 0 : probs.size() - 1;
}

} // namespace symdyn
