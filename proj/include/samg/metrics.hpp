#pragma once

#include "samg/field.hpp"
#include "samg/scoremodel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace samg {

/// Desk-scale quality measures for one final sample. Distances are to the
/// nearest mixture mean, in units of sigma0; alignment compares the nearest
/// mean against the conditioned target, restricted to pixels whose mask value
/// exceeds the threshold. Nearest-mean ties break toward the lowest index.
template <typename Scalar>
struct SampleEvaluationT {
    std::vector<Scalar> pixel_distance;   // per pixel, sigma0 units
    std::vector<int> nearest_component;   // per pixel
    Scalar mean_distance = Scalar(0);
    Scalar p95_distance = Scalar(0);
    Scalar off_manifold_rate = Scalar(0);  // fraction with distance > 3
    Scalar alignment_rate = Scalar(1);     // vacuously 1 when no pixel clears the mask
    long masked_pixels = 0;
};

using SampleEvaluation = SampleEvaluationT<double>;

namespace detail {

template <typename Scalar>
Scalar percentile(std::vector<Scalar> values, double p) {
    if (values.empty()) return Scalar(0);
    std::sort(values.begin(), values.end());
    const double x = p * static_cast<double>(values.size() - 1);
    const auto i = static_cast<std::size_t>(x);
    const auto j = std::min(i + 1, values.size() - 1);
    const double a = x - static_cast<double>(i);
    return static_cast<Scalar>(static_cast<double>(values[i]) * (1.0 - a) +
                               static_cast<double>(values[j]) * a);
}

}  // namespace detail

template <typename Scalar>
SampleEvaluationT<Scalar> evaluate_sample(const LatentFieldT<Scalar>& z0,
                                          const PixelGMMT<Scalar>& m,
                                          const ConditionFieldT<Scalar>& cond,
                                          Scalar mask_threshold) {
    if (z0.channels() != m.channels())
        throw std::invalid_argument("evaluate_sample: channel mismatch");
    if (cond.height() != z0.height() || cond.width() != z0.width())
        throw std::invalid_argument("evaluate_sample: condition shape mismatch");

    SampleEvaluationT<Scalar> eval;
    eval.pixel_distance.reserve(static_cast<std::size_t>(z0.pixels()));
    eval.nearest_component.reserve(static_cast<std::size_t>(z0.pixels()));
    long off_manifold = 0;
    long aligned = 0;
    Scalar distance_sum = Scalar(0);
    for (Eigen::Index p = 0; p < z0.pixels(); ++p) {
        int nearest = 0;
        Scalar best = (z0.pixel(p).matrix() - m.mean(0)).norm();
        for (int k = 1; k < m.components(); ++k) {
            const Scalar d = (z0.pixel(p).matrix() - m.mean(k)).norm();
            if (d < best) {  // strict: ties keep the lowest index
                best = d;
                nearest = k;
            }
        }
        const Scalar dist = best / m.sigma0();
        eval.pixel_distance.push_back(dist);
        eval.nearest_component.push_back(nearest);
        distance_sum += dist;
        if (dist > Scalar(3)) ++off_manifold;
        if (cond.mask_at(p) > mask_threshold) {
            ++eval.masked_pixels;
            if (nearest == cond.target_at(p)) ++aligned;
        }
    }
    eval.mean_distance = distance_sum / Scalar(z0.pixels());
    eval.p95_distance = detail::percentile(eval.pixel_distance, 0.95);
    eval.off_manifold_rate = Scalar(off_manifold) / Scalar(z0.pixels());
    if (eval.masked_pixels > 0) eval.alignment_rate = Scalar(aligned) / Scalar(eval.masked_pixels);
    return eval;
}

/// Aggregate quality numbers of one guidance configuration across seeds.
template <typename Scalar>
struct ConfigAggregateT {
    std::string name;
    Scalar alignment_rate = Scalar(0);
    Scalar mean_distance = Scalar(0);
    Scalar p95_distance = Scalar(0);
    Scalar off_manifold_rate = Scalar(0);
};

template <typename Scalar>
struct ParetoRowT {
    ConfigAggregateT<Scalar> aggregate;
    bool dominated = false;
};

using ConfigAggregate = ConfigAggregateT<double>;
using ParetoRow = ParetoRowT<double>;

/// Rows sorted by alignment rate (descending); a config is flagged dominated
/// when another config is at least as good on both axes and strictly better on
/// at least one.
template <typename Scalar>
std::vector<ParetoRowT<Scalar>> pareto_table(
    const std::vector<ConfigAggregateT<Scalar>>& results) {
    if (results.size() < 2)
        throw std::invalid_argument("pareto_table: need at least two configurations");
    std::vector<ParetoRowT<Scalar>> rows;
    rows.reserve(results.size());
    for (const auto& r : results) rows.push_back({r, false});
    for (auto& row : rows) {
        for (const auto& other : results) {
            const bool no_worse = other.alignment_rate >= row.aggregate.alignment_rate &&
                                  other.mean_distance <= row.aggregate.mean_distance;
            const bool strictly_better = other.alignment_rate > row.aggregate.alignment_rate ||
                                         other.mean_distance < row.aggregate.mean_distance;
            if (no_worse && strictly_better) {
                row.dominated = true;
                break;
            }
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.aggregate.alignment_rate > b.aggregate.alignment_rate;
    });
    return rows;
}

}  // namespace samg
