#pragma once

#include "samg/field.hpp"
#include "samg/schedule.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace samg {

/// Per-pixel Gaussian mixture data model: K isotropic components in R^C with
/// shared standard deviation sigma0. Pixels are statistically independent, so
/// every score quantity has a closed form per spatial position.
template <typename Scalar>
class PixelGMMT {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    PixelGMMT(Matrix means, Scalar sigma0, Vector base_weights)
        : means_(std::move(means)), sigma0_(sigma0), base_weights_(std::move(base_weights)) {
        if (means_.cols() < 1 || means_.rows() < 1)
            throw std::invalid_argument("PixelGMM: need at least one component and channel");
        if (base_weights_.size() != means_.cols())
            throw std::invalid_argument("PixelGMM: weight count must match components");
        if (!(sigma0_ > Scalar(0)))
            throw std::invalid_argument("PixelGMM: sigma0 must be positive");
        if ((base_weights_.array() <= Scalar(0)).any())
            throw std::invalid_argument("PixelGMM: weights must be positive");
        if (std::abs(base_weights_.sum() - Scalar(1)) > Scalar(1e-12))
            throw std::invalid_argument("PixelGMM: weights must sum to 1");
    }

    int channels() const { return static_cast<int>(means_.rows()); }
    int components() const { return static_cast<int>(means_.cols()); }
    Scalar sigma0() const { return sigma0_; }
    const Matrix& means() const { return means_; }
    Vector mean(int k) const { return means_.col(k); }
    const Vector& base_weights() const { return base_weights_; }

    /// Mixture mean of the clean data distribution.
    Vector data_mean() const { return means_ * base_weights_; }

private:
    Matrix means_;  // C x K
    Scalar sigma0_;
    Vector base_weights_;  // K, positive, sums to 1
};

/// Spatial condition: a soft mask M(x) in [0, 1] and a target component index
/// per pixel. Conditional mixture weights interpolate linearly between the
/// base weights (M = 0) and a one-hot on the target (M = 1).
template <typename Scalar>
class ConditionFieldT {
public:
    using MaskArray = GridArray<Scalar>;
    using IndexArray = Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    ConditionFieldT(MaskArray mask, IndexArray target)
        : mask_(std::move(mask)), target_(std::move(target)) {
        if (mask_.rows() < 1 || mask_.cols() < 1)
            throw std::invalid_argument("ConditionField: empty mask");
        if (mask_.rows() != target_.rows() || mask_.cols() != target_.cols())
            throw std::invalid_argument("ConditionField: mask/target shape mismatch");
        mask_ = mask_.max(Scalar(0)).min(Scalar(1));
        if ((target_ < 0).any())
            throw std::invalid_argument("ConditionField: negative target index");
    }

    ConditionFieldT(MaskArray mask, int target_component)
        : ConditionFieldT(std::move(mask),
                          IndexArray::Constant(mask.rows(), mask.cols(), target_component)) {}

    Eigen::Index height() const { return mask_.rows(); }
    Eigen::Index width() const { return mask_.cols(); }

    Scalar mask(Eigen::Index y, Eigen::Index x) const { return mask_(y, x); }
    int target(Eigen::Index y, Eigen::Index x) const { return target_(y, x); }

    Scalar mask_at(Eigen::Index p) const { return mask_(p / mask_.cols(), p % mask_.cols()); }
    int target_at(Eigen::Index p) const { return target_(p / mask_.cols(), p % mask_.cols()); }

    const MaskArray& mask() const { return mask_; }
    const IndexArray& target() const { return target_; }

    int max_target() const { return target_.maxCoeff(); }

private:
    MaskArray mask_;    // H x W in [0, 1]
    IndexArray target_;  // H x W component indices
};

/// Arguments of one model evaluation: the latent state, a time point (discrete
/// step for diffusion, continuous time for flow), and an optional condition.
template <typename Scalar>
struct ScoreQueryT {
    LatentFieldT<Scalar> z;
    int step = -1;
    Scalar time = std::numeric_limits<Scalar>::quiet_NaN();
    std::optional<ConditionFieldT<Scalar>> condition;

    static ScoreQueryT at_step(LatentFieldT<Scalar> z, int step,
                               std::optional<ConditionFieldT<Scalar>> cond = std::nullopt) {
        ScoreQueryT q;
        q.z = std::move(z);
        q.step = step;
        q.condition = std::move(cond);
        return q;
    }

    static ScoreQueryT at_time(LatentFieldT<Scalar> z, Scalar time,
                               std::optional<ConditionFieldT<Scalar>> cond = std::nullopt) {
        ScoreQueryT q;
        q.z = std::move(z);
        q.time = time;
        q.condition = std::move(cond);
        return q;
    }
};

using PixelGMM = PixelGMMT<double>;
using ConditionField = ConditionFieldT<double>;
using ScoreQuery = ScoreQueryT<double>;

/// Scaled component means and the common marginal variance of z_t under the
/// forward corruption z_t = sqrt(ab) z0 + sqrt(1 - ab) eps.
template <typename Scalar>
struct MarginalParamsT {
    typename PixelGMMT<Scalar>::Matrix means;  // C x K, sqrt(ab) * mu_k
    Scalar variance;                           // ab * sigma0^2 + (1 - ab)
};

template <typename Scalar>
MarginalParamsT<Scalar> marginal_params(const PixelGMMT<Scalar>& m,
                                        const DiffusionScheduleT<Scalar>& s, int t) {
    const Scalar ab = s.alpha_bar(t);
    MarginalParamsT<Scalar> out;
    out.means = std::sqrt(ab) * m.means();
    out.variance = ab * m.sigma0() * m.sigma0() + (Scalar(1) - ab);
    return out;
}

/// Marginal of z_t = (1 - t) z0 + t eps under the linear flow interpolation.
template <typename Scalar>
MarginalParamsT<Scalar> flow_marginal_params(const PixelGMMT<Scalar>& m, Scalar t) {
    MarginalParamsT<Scalar> out;
    out.means = (Scalar(1) - t) * m.means();
    out.variance = (Scalar(1) - t) * (Scalar(1) - t) * m.sigma0() * m.sigma0() + t * t;
    return out;
}

namespace detail {

/// Mixture weights at one pixel: base weights blended toward a one-hot on the
/// target component by the mask value.
template <typename Scalar>
typename PixelGMMT<Scalar>::Vector conditional_weights(
    const PixelGMMT<Scalar>& m, const std::optional<ConditionFieldT<Scalar>>& cond,
    Eigen::Index p) {
    if (!cond) return m.base_weights();
    const Scalar mval = cond->mask_at(p);
    const int k_star = cond->target_at(p);
    if (k_star >= m.components())
        throw std::invalid_argument("ConditionField: target index exceeds component count");
    typename PixelGMMT<Scalar>::Vector w = (Scalar(1) - mval) * m.base_weights();
    w[k_star] += mval;
    return w;
}

/// Log-sum-exp of per-component log terms log w_k - ||z - m_k||^2 / (2 var),
/// plus responsibilities. Components with zero weight are excluded.
template <typename Scalar, typename ZVec>
Scalar pixel_responsibilities(const typename PixelGMMT<Scalar>::Matrix& means, Scalar var,
                              const typename PixelGMMT<Scalar>::Vector& weights,
                              const ZVec& z, typename PixelGMMT<Scalar>::Vector& resp) {
    const Eigen::Index k_count = means.cols();
    typename PixelGMMT<Scalar>::Vector logits(k_count);
    Scalar max_logit = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index k = 0; k < k_count; ++k) {
        if (weights[k] > Scalar(0)) {
            const Scalar sq = (z.matrix() - means.col(k)).squaredNorm();
            logits[k] = std::log(weights[k]) - sq / (Scalar(2) * var);
            max_logit = std::max(max_logit, logits[k]);
        } else {
            logits[k] = -std::numeric_limits<Scalar>::infinity();
        }
    }
    Scalar sum = Scalar(0);
    for (Eigen::Index k = 0; k < k_count; ++k) {
        resp[k] = (logits[k] == -std::numeric_limits<Scalar>::infinity())
                      ? Scalar(0)
                      : std::exp(logits[k] - max_logit);
        sum += resp[k];
    }
    resp /= sum;
    return max_logit + std::log(sum);  // log-sum-exp of the logits
}

template <typename Scalar, typename ZVec>
Scalar pixel_log_density(const typename PixelGMMT<Scalar>::Matrix& means, Scalar var,
                         const typename PixelGMMT<Scalar>::Vector& weights, const ZVec& z) {
    typename PixelGMMT<Scalar>::Vector resp(means.cols());
    const Scalar lse = pixel_responsibilities<Scalar>(means, var, weights, z, resp);
    const Scalar c = Scalar(means.rows());
    constexpr Scalar two_pi = Scalar(6.283185307179586476925286766559);
    return lse - (c / Scalar(2)) * std::log(two_pi * var);
}

/// grad_z log p(z) for the isotropic mixture: sum_k r_k (m_k - z) / var.
template <typename Scalar, typename ZVec>
typename PixelGMMT<Scalar>::Vector pixel_score(const typename PixelGMMT<Scalar>::Matrix& means,
                                               Scalar var,
                                               const typename PixelGMMT<Scalar>::Vector& weights,
                                               const ZVec& z) {
    typename PixelGMMT<Scalar>::Vector resp(means.cols());
    pixel_responsibilities<Scalar>(means, var, weights, z, resp);
    return (means * resp - z.matrix()) / var;
}

/// Hessian of log p: -I/var + Cov_r[m_k]/var^2 under the responsibilities.
template <typename Scalar, typename ZVec>
typename PixelGMMT<Scalar>::Matrix pixel_hessian(const typename PixelGMMT<Scalar>::Matrix& means,
                                                 Scalar var,
                                                 const typename PixelGMMT<Scalar>::Vector& weights,
                                                 const ZVec& z) {
    using Matrix = typename PixelGMMT<Scalar>::Matrix;
    const Eigen::Index c = means.rows();
    typename PixelGMMT<Scalar>::Vector resp(means.cols());
    pixel_responsibilities<Scalar>(means, var, weights, z, resp);
    typename PixelGMMT<Scalar>::Vector mbar = means * resp;
    Matrix second = Matrix::Zero(c, c);
    for (Eigen::Index k = 0; k < means.cols(); ++k)
        second.noalias() += resp[k] * means.col(k) * means.col(k).transpose();
    Matrix cov = second - mbar * mbar.transpose();
    return -Matrix::Identity(c, c) / var + cov / (var * var);
}

}  // namespace detail

/// Noise prediction eps(z_t) = -sqrt(1 - ab_t) * grad log p_t(z_t), evaluated
/// per pixel against the exact mixture marginal, conditional when the query
/// carries a condition.
template <typename Scalar>
LatentFieldT<Scalar> eps_prediction(const PixelGMMT<Scalar>& m, const ScoreQueryT<Scalar>& q,
                                    const DiffusionScheduleT<Scalar>& s) {
    if (q.z.channels() != m.channels())
        throw std::invalid_argument("eps_prediction: channel mismatch");
    const auto params = marginal_params(m, s, q.step);
    if (!(params.variance > Scalar(0)))
        throw std::invalid_argument("eps_prediction: degenerate marginal variance");
    const Scalar scale = -std::sqrt(Scalar(1) - s.alpha_bar(q.step));
    LatentFieldT<Scalar> out(q.z.channels(), q.z.height(), q.z.width());
    for (Eigen::Index p = 0; p < q.z.pixels(); ++p) {
        const auto w = detail::conditional_weights(m, q.condition, p);
        out.pixel(p) =
            scale * detail::pixel_score<Scalar>(params.means, params.variance, w, q.z.pixel(p));
    }
    return out;
}

/// Velocity prediction v(z_t) = (z_t - E[z0 | z_t]) / t under the linear flow
/// interpolation; exact posterior over z0 per mixture component.
template <typename Scalar>
LatentFieldT<Scalar> velocity_prediction(const PixelGMMT<Scalar>& m, const ScoreQueryT<Scalar>& q,
                                         const FlowGridT<Scalar>& grid) {
    (void)grid;  // the grid fixes the convention; the formula needs only q.time
    if (q.z.channels() != m.channels())
        throw std::invalid_argument("velocity_prediction: channel mismatch");
    const Scalar t = q.time;
    if (!(t > Scalar(0)) || t > Scalar(1))
        throw std::invalid_argument("velocity_prediction: flow time must lie in (0, 1]");
    const auto params = flow_marginal_params(m, t);
    const Scalar s0sq = m.sigma0() * m.sigma0();
    const Scalar gain = (Scalar(1) - t) * s0sq / params.variance;
    LatentFieldT<Scalar> out(q.z.channels(), q.z.height(), q.z.width());
    typename PixelGMMT<Scalar>::Vector resp(m.components());
    for (Eigen::Index p = 0; p < q.z.pixels(); ++p) {
        const auto w = detail::conditional_weights(m, q.condition, p);
        detail::pixel_responsibilities<Scalar>(params.means, params.variance, w, q.z.pixel(p),
                                               resp);
        // E[z0 | z_t, k] = mu_k + gain * (z_t - (1 - t) mu_k), mixed over k.
        typename PixelGMMT<Scalar>::Vector z0_hat =
            m.means() * resp + gain * (q.z.pixel(p).matrix() - params.means * resp);
        out.pixel(p) = (q.z.pixel(p).matrix() - z0_hat).array() / t;
    }
    return out;
}

/// Exact log marginal density per pixel, log-sum-exp stabilized.
template <typename Scalar>
EnergyMapT<Scalar> log_density(const PixelGMMT<Scalar>& m, const ScoreQueryT<Scalar>& q,
                               const DiffusionScheduleT<Scalar>& s) {
    if (q.z.channels() != m.channels())
        throw std::invalid_argument("log_density: channel mismatch");
    const auto params = marginal_params(m, s, q.step);
    GridArray<Scalar> out(q.z.height(), q.z.width());
    Eigen::Map<Eigen::Array<Scalar, 1, Eigen::Dynamic>> flat(out.data(), q.z.pixels());
    for (Eigen::Index p = 0; p < q.z.pixels(); ++p) {
        const auto w = detail::conditional_weights(m, q.condition, p);
        flat[p] = detail::pixel_log_density<Scalar>(params.means, params.variance, w,
                                                    q.z.pixel(p));
    }
    return EnergyMapT<Scalar>(q.z.height(), q.z.width(), std::move(out));
}

/// Exact Hessians of the log marginal density, one C x C matrix per pixel.
/// Satisfies H = -J_eps / sqrt(1 - ab_t).
template <typename Scalar>
std::vector<typename PixelGMMT<Scalar>::Matrix> score_hessian(
    const PixelGMMT<Scalar>& m, const ScoreQueryT<Scalar>& q,
    const DiffusionScheduleT<Scalar>& s) {
    if (q.z.channels() != m.channels())
        throw std::invalid_argument("score_hessian: channel mismatch");
    const auto params = marginal_params(m, s, q.step);
    std::vector<typename PixelGMMT<Scalar>::Matrix> out;
    out.reserve(static_cast<std::size_t>(q.z.pixels()));
    for (Eigen::Index p = 0; p < q.z.pixels(); ++p) {
        const auto w = detail::conditional_weights(m, q.condition, p);
        out.push_back(
            detail::pixel_hessian<Scalar>(params.means, params.variance, w, q.z.pixel(p)));
    }
    return out;
}

}  // namespace samg
