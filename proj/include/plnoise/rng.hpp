#pragma once

// Deterministic random variate generation. std:: distributions are
// implementation-defined, so samplers are spelled out here: identical seeds
// give identical streams on every platform.

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "plnoise/math.hpp"

namespace plnoise {

/// xoshiro256++ with splitmix64 seeding.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : state_) {
            // splitmix64
            x += 0x9e3779b97f4a7c15ull;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            w = z ^ (z >> 31);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in (0, 1): 53-bit mantissa, never exactly 0.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Marsaglia polar method (cached pair).
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        cached_ = v * f;
        have_cached_ = true;
        return u * f;
    }

    /// Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("Rng::gamma: shape > 0");
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double chi_square(double nu) { return 2.0 * gamma(0.5 * nu); }

    /// Student-t with real nu > 0: Z / sqrt(V/nu). The two draws are
    /// sequenced explicitly; a single expression would leave their order
    /// unspecified and streams would differ between call sites.
    double student_t(double nu) {
        const double z = normal();
        const double v = chi_square(nu);
        return z / std::sqrt(v / nu);
    }

    /// Derive an independent per-stream generator (e.g. per frequency).
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        // mix the stream id through splitmix-style finalization
        std::uint64_t z = seed ^ (stream * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return Rng(z ^ (z >> 31));
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4]{};
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace plnoise
