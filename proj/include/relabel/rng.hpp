#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace relabel {

// splitmix64 finalizer; used to derive independent stream seeds from a
// base seed plus a stream id so evaluation order never changes results.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Deterministic RNG: mt19937_64 engine (fully pinned by the standard) with
// hand-rolled distributions, since std:: distribution implementations are
// not bit-stable across library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform double in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, n).
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
        const std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = engine_();
        while (x >= bound) x = engine_();
        return x % n;
    }

    // Standard normal via Box-Muller with cached spare.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Draw an index from a probability vector (inverse CDF).
    std::size_t categorical(std::span<const double> probs) {
        const double u = uniform();
        double cum = 0.0;
        std::size_t last_positive = 0;
        bool seen_positive = false;
        for (std::size_t c = 0; c < probs.size(); ++c) {
            if (probs[c] > 0.0) {
                last_positive = c;
                seen_positive = true;
            }
            cum += probs[c];
            if (u < cum) return c;
        }
        if (!seen_positive) throw std::invalid_argument("categorical: all-zero probability vector");
        return last_positive;  // u landed past cum due to rounding
    }

    // Uniform permutation in place (Fisher-Yates).
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace relabel
