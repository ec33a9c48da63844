#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "ihdr/errors.hpp"

namespace ihdr {

// Deterministic random source used everywhere randomness is needed.
//
// The generator is std::mt19937_64, whose output sequence is fully specified
// by the C++ standard. All conversions to doubles and integer ranges are done
// by hand below instead of through std::*_distribution, because distribution
// implementations differ between standard libraries. Given the same seed, a
// Rng therefore produces bit-identical streams on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1), 53 random mantissa bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        if (!(lo <= hi)) throw InvalidArgument("rng: uniform bounds out of order");
        return lo + (hi - lo) * uniform();
    }

    // Inclusive integer range. Modulo reduction; the bias is < 2^-44 for the
    // small ranges used here.
    int uniform_int(int lo, int hi) {
        if (lo > hi) throw InvalidArgument("rng: uniform_int bounds out of order");
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1u;
        return lo + static_cast<int>(engine_() % span);
    }

    double log_uniform(double lo, double hi) {
        if (!(lo > 0.0 && hi >= lo))
            throw InvalidArgument("rng: log_uniform bounds must be positive and ordered");
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    // Standard normal via Box-Muller; caches the second value of each pair.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1], keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace ihdr
