#pragma once

#include "samg/field.hpp"
#include "samg/guidance.hpp"
#include "samg/random.hpp"
#include "samg/schedule.hpp"
#include "samg/scoremodel.hpp"

#include <cmath>
#include <cstdint>
#include <type_traits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace samg {

/// One deterministic reverse run: every latent state from the seeded noise
/// down to the final sample, plus the guidance trace and the model-call count.
template <typename Scalar>
struct TrajectoryT {
    std::uint64_t seed = 0;
    std::vector<Scalar> times;                 // schedule indices or flow times, noise -> data
    std::vector<LatentFieldT<Scalar>> states;  // length steps + 1
    GuidanceTraceT<Scalar> trace;
    long score_evals = 0;

    const LatentFieldT<Scalar>& final_sample() const { return states.back(); }
};

using Trajectory = TrajectoryT<double>;

/// Deterministic DDIM update (eta = 0): project to the clean estimate with the
/// current noise prediction, then re-noise to the target step.
template <typename Scalar>
LatentFieldT<Scalar> ddim_step(const LatentFieldT<Scalar>& z, const LatentFieldT<Scalar>& eps,
                               int t, int t_prev, const DiffusionScheduleT<Scalar>& s) {
    if (!z.same_shape(eps))
        throw std::invalid_argument("ddim_step: dimension mismatch");
    if (t_prev < 0 || !(t > t_prev))
        throw std::invalid_argument("ddim_step: need t > t_prev >= 0");
    const Scalar ab_t = s.alpha_bar(t);
    const Scalar ab_prev = s.alpha_bar(t_prev);
    const Scalar sq_ab_t = std::sqrt(ab_t);
    const Scalar sq_one_minus_t = std::sqrt(Scalar(1) - ab_t);
    const Scalar sq_ab_prev = std::sqrt(ab_prev);
    const Scalar sq_one_minus_prev = std::sqrt(Scalar(1) - ab_prev);
    GridArray<Scalar> z0_hat = (z.array() - sq_one_minus_t * eps.array()) / sq_ab_t;
    GridArray<Scalar> out = sq_ab_prev * z0_hat + sq_one_minus_prev * eps.array();
    return LatentFieldT<Scalar>(z.channels(), z.height(), z.width(), std::move(out));
}

/// Explicit Euler update for the flow ODE: z - dt * v.
template <typename Scalar>
LatentFieldT<Scalar> euler_step(const LatentFieldT<Scalar>& z, const LatentFieldT<Scalar>& v,
                                Scalar dt) {
    if (!z.same_shape(v))
        throw std::invalid_argument("euler_step: dimension mismatch");
    if (!(dt > Scalar(0)))
        throw std::invalid_argument("euler_step: dt must be positive");
    return LatentFieldT<Scalar>(z.channels(), z.height(), z.width(),
                                z.array() - dt * v.array());
}

namespace detail {

/// Guided prediction shared by both solver loops; appends a trace record.
template <typename Scalar>
LatentFieldT<Scalar> guided_prediction(const LatentFieldT<Scalar>& pred_u,
                                       const LatentFieldT<Scalar>& pred_c,
                                       const GuidanceConfigT<Scalar>& cfg, Scalar t,
                                       GuidanceTraceT<Scalar>& trace) {
    LatentFieldT<Scalar> delta = delta_score(pred_c, pred_u);
    if (cfg.mode == GuidanceMode::Samg) {
        auto [out, record] = apply_samg(pred_u, delta, cfg);
        record.t = t;
        trace.records.push_back(std::move(record));
        return std::move(out);
    }
    LatentFieldT<Scalar> out = apply_cfg(pred_u, delta, cfg.omega);
    GuidanceTraceRecordT<Scalar> record;
    record.t = t;
    record.energy = channel_mean_square(delta);
    record.normalized = minmax_normalize(record.energy, Scalar(1e-8));
    record.omega = OmegaMapT<Scalar>(
        delta.height(), delta.width(), cfg.omega, cfg.omega,
        GridArray<Scalar>::Constant(delta.height(), delta.width(), cfg.omega));
    trace.records.push_back(std::move(record));
    return out;
}

template <typename Scalar>
void check_finite(const LatentFieldT<Scalar>& z, Scalar t) {
    if (!z.is_finite())
        throw std::runtime_error("run_sampler: non-finite latent at t = " +
                                 std::to_string(static_cast<double>(t)));
}

/// Uniformly spaced strictly decreasing schedule indices from s.steps() to 0.
template <typename Scalar>
std::vector<int> ddim_timesteps(const DiffusionScheduleT<Scalar>& s, int steps) {
    if (steps < 1 || steps > s.steps())
        throw std::invalid_argument("run_sampler: steps must lie in [1, schedule steps]");
    std::vector<int> ts(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i <= steps; ++i)
        ts[static_cast<std::size_t>(i)] = static_cast<int>(
            std::llround(static_cast<double>(i) * s.steps() / static_cast<double>(steps)));
    for (int i = 1; i <= steps; ++i)
        if (ts[static_cast<std::size_t>(i)] <= ts[static_cast<std::size_t>(i - 1)])
            throw std::invalid_argument("run_sampler: degenerate timestep spacing");
    return ts;  // increasing; the loop walks it backwards
}

}  // namespace detail

/// Full guided DDIM reverse loop. Draws z_N from a seeded standard normal,
/// evaluates the unconditional/conditional pair once per step (2N model calls
/// total, guidance adds none), and records every intermediate state.
template <typename Scalar>
TrajectoryT<Scalar> run_sampler(
    const PixelGMMT<Scalar>& model,
    const std::optional<ConditionFieldT<std::type_identity_t<Scalar>>>& condition,
    const DiffusionScheduleT<Scalar>& schedule,
                                const GuidanceConfigT<Scalar>& guidance, int steps,
                                std::uint64_t seed, Eigen::Index height, Eigen::Index width) {
    guidance.validate();
    const std::vector<int> ts = detail::ddim_timesteps(schedule, steps);

    TrajectoryT<Scalar> traj;
    traj.seed = seed;
    traj.states.reserve(static_cast<std::size_t>(steps) + 1);
    LatentFieldT<Scalar> z = standard_normal_field<Scalar>(model.channels(), height, width, seed);
    traj.times.push_back(Scalar(ts.back()));
    traj.states.push_back(z);

    for (int i = steps; i >= 1; --i) {
        const int t = ts[static_cast<std::size_t>(i)];
        const int t_prev = ts[static_cast<std::size_t>(i - 1)];
        LatentFieldT<Scalar> eps_u =
            eps_prediction(model, ScoreQueryT<Scalar>::at_step(z, t), schedule);
        LatentFieldT<Scalar> eps_c =
            eps_prediction(model, ScoreQueryT<Scalar>::at_step(z, t, condition), schedule);
        traj.score_evals += 2;
        LatentFieldT<Scalar> guided =
            detail::guided_prediction(eps_u, eps_c, guidance, Scalar(t), traj.trace);
        z = ddim_step(z, guided, t, t_prev, schedule);
        detail::check_finite(z, Scalar(t_prev));
        traj.times.push_back(Scalar(t_prev));
        traj.states.push_back(z);
    }
    return traj;
}

/// Full guided Euler reverse loop over a flow grid, same contracts as the
/// diffusion variant.
template <typename Scalar>
TrajectoryT<Scalar> run_sampler(
    const PixelGMMT<Scalar>& model,
    const std::optional<ConditionFieldT<std::type_identity_t<Scalar>>>& condition,
    const FlowGridT<Scalar>& grid,
                                const GuidanceConfigT<Scalar>& guidance, std::uint64_t seed,
                                Eigen::Index height, Eigen::Index width) {
    guidance.validate();
    TrajectoryT<Scalar> traj;
    traj.seed = seed;
    traj.states.reserve(static_cast<std::size_t>(grid.steps()) + 1);
    LatentFieldT<Scalar> z = standard_normal_field<Scalar>(model.channels(), height, width, seed);
    traj.times.push_back(grid.time(0));
    traj.states.push_back(z);

    for (int i = 0; i < grid.steps(); ++i) {
        const Scalar t = grid.time(i);
        LatentFieldT<Scalar> v_u =
            velocity_prediction(model, ScoreQueryT<Scalar>::at_time(z, t), grid);
        LatentFieldT<Scalar> v_c =
            velocity_prediction(model, ScoreQueryT<Scalar>::at_time(z, t, condition), grid);
        traj.score_evals += 2;
        LatentFieldT<Scalar> guided =
            detail::guided_prediction(v_u, v_c, guidance, t, traj.trace);
        z = euler_step(z, guided, grid.dt(i));
        detail::check_finite(z, grid.time(i + 1));
        traj.times.push_back(grid.time(i + 1));
        traj.states.push_back(z);
    }
    return traj;
}

}  // namespace samg
