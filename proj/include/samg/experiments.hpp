#pragma once

#include "samg/config.hpp"
#include "samg/metrics.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace samg {

/// One (guidance, seed) cell of a sampling sweep.
struct CellResult {
    std::string guidance;
    std::uint64_t seed = 0;
    SampleEvaluation eval;
    /// Mean off-manifold distance restricted to the top decile of the
    /// late-trajectory energy map (mean of raw E_t over the final 20% of
    /// steps), in sigma0 units.
    double top_decile_distance = 0.0;
    long score_evals = 0;
};

struct GuidanceAggregate {
    ConfigAggregate metrics;
    double top_decile_distance = 0.0;
};

struct SampleRun {
    std::vector<CellResult> cells;             // ordered by (guidance, seed)
    std::vector<GuidanceAggregate> aggregates;  // one per guidance config
};

/// Runs every (guidance, seed) pair; when write_artifacts is set, emits one
/// sample file and one trace CSV per cell plus a combined metrics CSV.
SampleRun cmd_sample(const ExperimentConfig& cfg, bool write_artifacts = true);

struct EnergyMapStats {
    long records = 0;
    long late_records = 0;           // final 20% of timesteps
    double late_mean_inside = 0.0;   // mean E_t over masked pixels, late steps
    double late_mean_outside = 0.0;  // mean E_t over unmasked pixels, late steps
    bool inside_exceeds(double factor) const {
        return late_mean_inside >= factor * late_mean_outside;
    }
};

/// Dumps per-timestep energy and omega maps (PGM) with an index CSV for the
/// first SAMG guidance config at seed_begin, and reports the in/out-of-mask
/// energy statistic over the final 20% of timesteps.
EnergyMapStats cmd_energy_maps(const ExperimentConfig& cfg, bool write_artifacts = true);

struct VerifyOptions {
    std::string only;  // empty = every check; otherwise an exact check name
    bool corrupt_hessian_sign = false;  // test hook: must break the spectral check
    double delta = 0.005;
    std::uint64_t seed = 20240811;
    std::string out_dir;  // empty = no CSV artifact
};

/// One verification family: slack <= 0 means every probe stayed within
/// tolerance; pass mirrors that plus a zero violation count.
struct VerifyCheckRow {
    std::string name;
    long points = 0;
    long violations = 0;
    double max_slack = 0.0;  // worst margin beyond the stated tolerance
    bool pass = false;
};

struct VerifyReport {
    std::vector<VerifyCheckRow> rows;
    bool all_pass() const;
    void print(std::ostream& os) const;
    void write_csv(const std::string& path) const;
};

/// The numerical verification suite: score gradient/Hessian oracles, the
/// quadratic deviation law, the tangent-line bound, the accumulation bound,
/// the spectral curvature bound with its tightness case, the smoothing
/// violation, and the flow truncation arithmetic.
VerifyReport run_verification(const VerifyOptions& options);

/// Names accepted by VerifyOptions::only.
std::vector<std::string> verification_check_names();

struct AblationRow {
    std::string name;
    double alignment_rate = 0.0;
    double mean_distance = 0.0;
    double p95_distance = 0.0;
    double off_manifold_rate = 0.0;
    double top_decile_distance = 0.0;
    bool dominated = false;
};

struct AblationTable {
    std::vector<AblationRow> rows;  // sorted by alignment rate, descending
    void print(std::ostream& os) const;
    void write_csv(const std::string& path) const;
};

/// Runs the guidance grid of the config and emits the Pareto table.
AblationTable cmd_ablate(const ExperimentConfig& cfg, bool write_artifacts = true);

}  // namespace samg
