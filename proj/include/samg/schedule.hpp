#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace samg {

/// Cumulative variance schedule for the discrete diffusion solver.
/// Index 0 is clean data (alpha_bar = 1), index N is the noisiest step;
/// values are strictly decreasing and stay in (0, 1].
template <typename Scalar>
class DiffusionScheduleT {
public:
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    explicit DiffusionScheduleT(Array alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
        if (alpha_bar_.size() < 2)
            throw std::invalid_argument("DiffusionSchedule: need at least one step");
        if (alpha_bar_[0] != Scalar(1))
            throw std::invalid_argument("DiffusionSchedule: alpha_bar[0] must be 1");
        for (Eigen::Index t = 0; t < alpha_bar_.size(); ++t) {
            if (!(alpha_bar_[t] > Scalar(0)) || alpha_bar_[t] > Scalar(1))
                throw std::invalid_argument("DiffusionSchedule: values must lie in (0, 1]");
            if (t > 0 && !(alpha_bar_[t] < alpha_bar_[t - 1]))
                throw std::invalid_argument("DiffusionSchedule: alpha_bar must strictly decrease");
        }
    }

    int steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }

    Scalar alpha_bar(int t) const {
        if (t < 0 || t > steps())
            throw std::out_of_range("DiffusionSchedule: step index out of range");
        return alpha_bar_[t];
    }

    const Array& alpha_bar() const { return alpha_bar_; }

private:
    Array alpha_bar_;  // length steps + 1
};

/// Time grid for the flow solver: strictly decreasing from 1 (noise) to 0 (data).
template <typename Scalar>
class FlowGridT {
public:
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    explicit FlowGridT(Array times) : times_(std::move(times)) {
        if (times_.size() < 2)
            throw std::invalid_argument("FlowGrid: need at least one interval");
        if (times_[0] != Scalar(1) || times_[times_.size() - 1] != Scalar(0))
            throw std::invalid_argument("FlowGrid: times must run from 1 to 0");
        for (Eigen::Index i = 1; i < times_.size(); ++i)
            if (!(times_[i] < times_[i - 1]))
                throw std::invalid_argument("FlowGrid: times must strictly decrease");
    }

    static FlowGridT uniform(int steps) {
        if (steps < 1) throw std::invalid_argument("FlowGrid: steps must be positive");
        Array t(steps + 1);
        for (int i = 0; i <= steps; ++i)
            t[i] = Scalar(steps - i) / Scalar(steps);
        return FlowGridT(std::move(t));
    }

    int steps() const { return static_cast<int>(times_.size()) - 1; }

    Scalar time(int i) const {
        if (i < 0 || i > steps())
            throw std::out_of_range("FlowGrid: index out of range");
        return times_[i];
    }

    Scalar dt(int i) const {
        if (i < 0 || i >= steps())
            throw std::out_of_range("FlowGrid: interval index out of range");
        return times_[i] - times_[i + 1];
    }

    const Array& times() const { return times_; }

private:
    Array times_;  // length steps + 1, times[0] = 1, times[N] = 0
};

using DiffusionSchedule = DiffusionScheduleT<double>;
using FlowGrid = FlowGridT<double>;

/// alpha_bar[t] = prod_{i<=t} (1 - beta_i) with beta linearly spaced over
/// [beta_start, beta_end] (a single step uses beta_start).
template <typename Scalar = double>
DiffusionScheduleT<Scalar> linear_beta_schedule(int n, Scalar beta_start, Scalar beta_end) {
    if (n < 1) throw std::invalid_argument("linear_beta_schedule: n must be positive");
    if (!(beta_start > Scalar(0)) || !(beta_start <= beta_end) || !(beta_end < Scalar(1)))
        throw std::invalid_argument("linear_beta_schedule: need 0 < beta_start <= beta_end < 1");
    typename DiffusionScheduleT<Scalar>::Array ab(n + 1);
    ab[0] = Scalar(1);
    Scalar prod = Scalar(1);
    for (int i = 1; i <= n; ++i) {
        const Scalar beta =
            (n == 1) ? beta_start
                     : beta_start + (beta_end - beta_start) * Scalar(i - 1) / Scalar(n - 1);
        prod *= Scalar(1) - beta;
        ab[i] = prod;
    }
    return DiffusionScheduleT<Scalar>(std::move(ab));
}

/// c_t = C * (1 - alpha_bar_t) / alpha_bar_t, the step-size constant of the
/// Tweedie projection at step t.
template <typename Scalar>
Scalar tweedie_coefficient(const DiffusionScheduleT<Scalar>& s, int t, int channels) {
    if (t < 1 || t > s.steps())
        throw std::out_of_range("tweedie_coefficient: step index out of range");
    const Scalar ab = s.alpha_bar(t);
    return Scalar(channels) * (Scalar(1) - ab) / ab;
}

/// c_t = C * dt^2, the Euler-integration analog.
template <typename Scalar>
Scalar flow_coefficient(Scalar dt, int channels) {
    if (!(dt > Scalar(0)))
        throw std::invalid_argument("flow_coefficient: dt must be positive");
    return Scalar(channels) * dt * dt;
}

}  // namespace samg
