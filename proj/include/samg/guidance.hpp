#pragma once

#include "samg/field.hpp"
#include "samg/io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace samg {

enum class GuidanceMode { Uniform, Samg };

/// Guidance parameters. Uniform mode extrapolates with a single scalar omega;
/// SAMG mode maps normalized per-pixel energy onto [omega_min, omega_max].
template <typename Scalar>
struct GuidanceConfigT {
    GuidanceMode mode = GuidanceMode::Uniform;
    Scalar omega = Scalar(1);       // uniform mode
    Scalar omega_min = Scalar(1);   // samg mode
    Scalar omega_max = Scalar(1);   // samg mode
    int kernel = 1;                 // odd; >1 box-smooths the energy map
    Scalar tau = Scalar(1e-8);

    static GuidanceConfigT uniform(Scalar omega) {
        GuidanceConfigT c;
        c.mode = GuidanceMode::Uniform;
        c.omega = omega;
        return c;
    }

    static GuidanceConfigT samg(Scalar omega_min, Scalar omega_max, int kernel = 1,
                                Scalar tau = Scalar(1e-8)) {
        GuidanceConfigT c;
        c.mode = GuidanceMode::Samg;
        c.omega_min = omega_min;
        c.omega_max = omega_max;
        c.kernel = kernel;
        c.tau = tau;
        return c;
    }

    void validate() const {
        if (mode == GuidanceMode::Uniform) {
            if (!(omega > Scalar(0)))
                throw std::invalid_argument("GuidanceConfig: omega must be positive");
            return;
        }
        if (!(omega_min > Scalar(0)) || !(omega_min <= omega_max))
            throw std::invalid_argument("GuidanceConfig: need 0 < omega_min <= omega_max");
        if (!(tau > Scalar(0)))
            throw std::invalid_argument("GuidanceConfig: tau must be positive");
        if (kernel < 1 || kernel % 2 == 0)
            throw std::invalid_argument("GuidanceConfig: kernel must be odd and positive");
    }
};

/// One per-timestep record of the quantities SAMG derives from the delta
/// score: raw energy, normalized energy, and the applied scale map.
template <typename Scalar>
struct GuidanceTraceRecordT {
    Scalar t = Scalar(0);  // schedule step index or flow time
    EnergyMapT<Scalar> energy;
    EnergyMapT<Scalar> normalized;
    OmegaMapT<Scalar> omega;
};

template <typename Scalar>
struct GuidanceTraceT {
    std::vector<GuidanceTraceRecordT<Scalar>> records;

    /// CSV with one row per timestep: t, E_min, E_max, E_mean, Omega_min,
    /// Omega_max, Omega_mean.
    void write_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("GuidanceTrace: cannot open " + path);
        os << "t,E_min,E_max,E_mean,Omega_min,Omega_max,Omega_mean\n";
        os.precision(17);
        for (const auto& r : records) {
            os << r.t << ',' << r.energy.array().minCoeff() << ','
               << r.energy.array().maxCoeff() << ',' << r.energy.array().mean() << ','
               << r.omega.array().minCoeff() << ',' << r.omega.array().maxCoeff() << ','
               << r.omega.array().mean() << '\n';
        }
    }

    /// Per-timestep PGM dumps named <prefix>energy_NNN.pgm / <prefix>omega_NNN.pgm.
    void write_pgms(const std::string& prefix) const {
        for (std::size_t i = 0; i < records.size(); ++i) {
            const std::string tag = std::to_string(i);
            write_pgm(prefix + "energy_" + tag + ".pgm", records[i].energy);
            write_pgm(prefix + "omega_" + tag + ".pgm", records[i].omega);
        }
    }
};

using GuidanceConfig = GuidanceConfigT<double>;
using GuidanceTrace = GuidanceTraceT<double>;

/// Delta score: conditional minus unconditional prediction.
template <typename Scalar>
LatentFieldT<Scalar> delta_score(const LatentFieldT<Scalar>& eps_c,
                                 const LatentFieldT<Scalar>& eps_u) {
    if (!eps_c.same_shape(eps_u))
        throw std::invalid_argument("delta_score: dimension mismatch");
    return LatentFieldT<Scalar>(eps_c.channels(), eps_c.height(), eps_c.width(),
                                eps_c.array() - eps_u.array());
}

/// Uniform classifier-free guidance: eps_u + omega * delta.
template <typename Scalar>
LatentFieldT<Scalar> apply_cfg(const LatentFieldT<Scalar>& eps_u,
                               const LatentFieldT<Scalar>& delta, Scalar omega) {
    if (!eps_u.same_shape(delta))
        throw std::invalid_argument("apply_cfg: dimension mismatch");
    return LatentFieldT<Scalar>(eps_u.channels(), eps_u.height(), eps_u.width(),
                                eps_u.array() + omega * delta.array());
}

namespace detail {

/// Smoothing + normalization + affine remap shared by build_omega_map and
/// apply_samg; returns the normalized map alongside the scale map.
template <typename Scalar>
std::pair<EnergyMapT<Scalar>, OmegaMapT<Scalar>> normalized_omega(
    const EnergyMapT<Scalar>& energy, const GuidanceConfigT<Scalar>& cfg) {
    if (cfg.mode != GuidanceMode::Samg)
        throw std::invalid_argument("build_omega_map: config must be in samg mode");
    cfg.validate();
    EnergyMapT<Scalar> normalized = minmax_normalize(box_smooth(energy, cfg.kernel), cfg.tau);
    GridArray<Scalar> omega =
        cfg.omega_max - normalized.array() * (cfg.omega_max - cfg.omega_min);
    OmegaMapT<Scalar> omega_map(energy.height(), energy.width(), cfg.omega_min,
                                cfg.omega_max, std::move(omega));
    return {std::move(normalized), std::move(omega_map)};
}

}  // namespace detail

/// Optional box smoothing, min/max normalization, then the affine map
/// omega_max - E_hat * (omega_max - omega_min). The energy argmin receives
/// exactly omega_max; the argmax lands within (omega_max-omega_min)*tau/(range+tau)
/// of omega_min.
template <typename Scalar>
OmegaMapT<Scalar> build_omega_map(const EnergyMapT<Scalar>& energy,
                                  const GuidanceConfigT<Scalar>& cfg) {
    return detail::normalized_omega(energy, cfg).second;
}

/// Spatially adaptive guidance: eps_u + Omega_map (*) delta, with the omega map
/// derived from the delta-score energy. Also returns the trace record.
template <typename Scalar>
std::pair<LatentFieldT<Scalar>, GuidanceTraceRecordT<Scalar>> apply_samg(
    const LatentFieldT<Scalar>& eps_u, const LatentFieldT<Scalar>& delta,
    const GuidanceConfigT<Scalar>& cfg) {
    if (!eps_u.same_shape(delta))
        throw std::invalid_argument("apply_samg: dimension mismatch");
    EnergyMapT<Scalar> energy = channel_mean_square(delta);
    auto [normalized, omega] = detail::normalized_omega(energy, cfg);
    LatentFieldT<Scalar> scaled = broadcast_scale(delta, omega);
    LatentFieldT<Scalar> out(eps_u.channels(), eps_u.height(), eps_u.width(),
                             eps_u.array() + scaled.array());
    GuidanceTraceRecordT<Scalar> record;
    record.energy = std::move(energy);
    record.normalized = std::move(normalized);
    record.omega = std::move(omega);
    return {std::move(out), std::move(record)};
}

/// Tangent-line constants of f(E) = E^{-1/2} at eta0:
/// g(E) = C1 - C2 E with C1 = (3/2) eta0^{-1/2}, C2 = (1/2) eta0^{-3/2}.
/// g lower-bounds f everywhere on E > 0, with equality only at eta0.
template <typename Scalar>
std::pair<Scalar, Scalar> taylor_bound_constants(Scalar eta0) {
    if (!(eta0 > Scalar(0)))
        throw std::invalid_argument("taylor_bound_constants: eta0 must be positive");
    const Scalar c1 = Scalar(1.5) / std::sqrt(eta0);
    const Scalar c2 = Scalar(0.5) / (eta0 * std::sqrt(eta0));
    return {c1, c2};
}

}  // namespace samg
