#pragma once

#include "samg/field.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace samg {

/// Deterministic standard-normal source. Box-Muller over mt19937_64 keeps the
/// byte stream identical across standard-library implementations, which the
/// bit-exact trajectory contracts rely on.
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : engine_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * pi() * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::uint64_t next_u64() { return engine_(); }

private:
    static constexpr double pi() { return 3.141592653589793238462643383279502884; }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// C x H x W field of iid standard-normal draws, fully determined by the seed.
template <typename Scalar = double>
LatentFieldT<Scalar> standard_normal_field(Eigen::Index channels, Eigen::Index height,
                                           Eigen::Index width, std::uint64_t seed) {
    NormalSource rng(seed);
    LatentFieldT<Scalar> f(channels, height, width);
    Scalar* p = f.array().data();
    for (Eigen::Index i = 0; i < f.size(); ++i) p[i] = static_cast<Scalar>(rng.next());
    return f;
}

}  // namespace samg
