#pragma once

#include "samg/guidance.hpp"
#include "samg/scoremodel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace samg {

struct SolverSpec {
    enum class Family { Ddim, Euler };
    Family family = Family::Ddim;
    int steps = 50;             // sampler steps
    int schedule_steps = 1000;  // diffusion schedule resolution (ddim only)
    double beta_start = 1e-4;
    double beta_end = 0.02;
};

struct NamedGuidance {
    std::string name;
    GuidanceConfig config;
};

/// One experiment: an analytic testbed, a solver, and a sweep of guidance
/// configurations over a seed range [seed_begin, seed_end).
struct ExperimentConfig {
    int channels = 0;
    int height = 0;
    int width = 0;
    Eigen::MatrixXd means;  // C x K
    double sigma0 = 0.1;
    Eigen::VectorXd weights;
    GridArray<double> mask;
    ConditionField::IndexArray target;

    SolverSpec solver;
    std::vector<NamedGuidance> guidance;

    std::uint64_t seed_begin = 0;
    std::uint64_t seed_end = 1;
    double mask_threshold = 0.5;
    double delta = 0.005;  // deviation tolerance for the verification suite
    std::string out_dir = "out";
    int threads = 1;

    PixelGMM model() const { return PixelGMM(means, sigma0, weights); }
    ConditionField condition() const { return ConditionField(mask, target); }
    std::vector<std::uint64_t> seeds() const {
        std::vector<std::uint64_t> out;
        for (std::uint64_t s = seed_begin; s < seed_end; ++s) out.push_back(s);
        return out;
    }
};

/// Parses the JSON experiment file; errors carry the offending field path.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// The built-in 16x16 C=4 K=4 disk testbed the experiment commands default to.
ExperimentConfig default_testbed();

}  // namespace samg
