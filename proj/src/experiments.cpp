#include "samg/experiments.hpp"

#include "samg/geometry.hpp"
#include "samg/io.hpp"
#include "samg/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

namespace samg {

namespace {

namespace fs = std::filesystem;

void parallel_for(int threads, std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const int workers = std::min<std::size_t>(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = static_cast<std::size_t>(w); i < count;
                 i += static_cast<std::size_t>(workers))
                fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

Trajectory run_trajectory(const ExperimentConfig& cfg, const PixelGMM& model,
                          const ConditionField& cond, const DiffusionSchedule* schedule,
                          const GuidanceConfig& guidance, std::uint64_t seed) {
    if (cfg.solver.family == SolverSpec::Family::Ddim) {
        return run_sampler(model, cond, *schedule, guidance, cfg.solver.steps, seed,
                           cfg.height, cfg.width);
    }
    const FlowGrid grid = FlowGrid::uniform(cfg.solver.steps);
    return run_sampler(model, cond, grid, guidance, seed, cfg.height, cfg.width);
}

/// Mean raw energy per pixel over the final 20% of trace records.
EnergyMap late_energy_map(const GuidanceTrace& trace, Eigen::Index h, Eigen::Index w) {
    const auto records = static_cast<long>(trace.records.size());
    const long late = std::max<long>(1, (records + 4) / 5);
    GridArray<double> acc = GridArray<double>::Zero(h, w);
    for (long i = records - late; i < records; ++i)
        acc += trace.records[static_cast<std::size_t>(i)].energy.array();
    acc /= static_cast<double>(late);
    return EnergyMap(h, w, std::move(acc));
}

double top_decile_distance(const EnergyMap& late_energy, const SampleEvaluation& eval) {
    std::vector<double> values(late_energy.flat().data(),
                               late_energy.flat().data() + late_energy.pixels());
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const auto cut = static_cast<std::size_t>(
        std::floor(0.9 * static_cast<double>(sorted.size() - 1)));
    const double threshold = sorted[cut];
    double sum = 0.0;
    long n = 0;
    for (std::size_t p = 0; p < values.size(); ++p) {
        if (values[p] >= threshold) {
            sum += eval.pixel_distance[p];
            ++n;
        }
    }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

std::string seed_tag(std::uint64_t seed) { return "seed" + std::to_string(seed); }

void write_metrics_csv(const std::string& path, const SampleRun& run) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os.precision(17);
    os << "config,seed,alignment_rate,mean_distance,p95_distance,off_manifold_rate,"
          "top_decile_distance\n";
    for (const auto& cell : run.cells)
        os << cell.guidance << ',' << cell.seed << ',' << cell.eval.alignment_rate << ','
           << cell.eval.mean_distance << ',' << cell.eval.p95_distance << ','
           << cell.eval.off_manifold_rate << ',' << cell.top_decile_distance << '\n';
    for (const auto& agg : run.aggregates)
        os << agg.metrics.name << ",aggregate," << agg.metrics.alignment_rate << ','
           << agg.metrics.mean_distance << ',' << agg.metrics.p95_distance << ','
           << agg.metrics.off_manifold_rate << ',' << agg.top_decile_distance << '\n';
}

}  // namespace

SampleRun cmd_sample(const ExperimentConfig& cfg, bool write_artifacts) {
    const PixelGMM model = cfg.model();
    const ConditionField cond = cfg.condition();
    std::optional<DiffusionSchedule> schedule;
    if (cfg.solver.family == SolverSpec::Family::Ddim)
        schedule = linear_beta_schedule(cfg.solver.schedule_steps, cfg.solver.beta_start,
                                        cfg.solver.beta_end);

    const std::vector<std::uint64_t> seeds = cfg.seeds();
    const std::size_t cells = cfg.guidance.size() * seeds.size();

    if (write_artifacts) {
        for (const auto& g : cfg.guidance)
            fs::create_directories(fs::path(cfg.out_dir) / g.name);
    }

    SampleRun run;
    run.cells.resize(cells);
    parallel_for(cfg.threads, cells, [&](std::size_t i) {
        const std::size_t gi = i / seeds.size();
        const std::uint64_t seed = seeds[i % seeds.size()];
        const NamedGuidance& g = cfg.guidance[gi];
        Trajectory traj = run_trajectory(cfg, model, cond, schedule ? &*schedule : nullptr,
                                         g.config, seed);
        CellResult cell;
        cell.guidance = g.name;
        cell.seed = seed;
        cell.score_evals = traj.score_evals;
        cell.eval = evaluate_sample(traj.final_sample(), model, cond, cfg.mask_threshold);
        cell.top_decile_distance =
            top_decile_distance(late_energy_map(traj.trace, cfg.height, cfg.width), cell.eval);
        if (write_artifacts) {
            const fs::path dir = fs::path(cfg.out_dir) / g.name;
            write_latent_field((dir / ("sample_" + seed_tag(seed) + ".lfld")).string(),
                               traj.final_sample());
            traj.trace.write_csv((dir / ("trace_" + seed_tag(seed) + ".csv")).string());
        }
        run.cells[i] = std::move(cell);
    });

    for (std::size_t gi = 0; gi < cfg.guidance.size(); ++gi) {
        GuidanceAggregate agg;
        agg.metrics.name = cfg.guidance[gi].name;
        for (std::size_t si = 0; si < seeds.size(); ++si) {
            const CellResult& cell = run.cells[gi * seeds.size() + si];
            agg.metrics.alignment_rate += cell.eval.alignment_rate;
            agg.metrics.mean_distance += cell.eval.mean_distance;
            agg.metrics.p95_distance += cell.eval.p95_distance;
            agg.metrics.off_manifold_rate += cell.eval.off_manifold_rate;
            agg.top_decile_distance += cell.top_decile_distance;
        }
        const auto n = static_cast<double>(seeds.size());
        agg.metrics.alignment_rate /= n;
        agg.metrics.mean_distance /= n;
        agg.metrics.p95_distance /= n;
        agg.metrics.off_manifold_rate /= n;
        agg.top_decile_distance /= n;
        run.aggregates.push_back(std::move(agg));
    }

    if (write_artifacts) {
        fs::create_directories(cfg.out_dir);
        write_metrics_csv((fs::path(cfg.out_dir) / "metrics.csv").string(), run);
    }
    return run;
}

EnergyMapStats cmd_energy_maps(const ExperimentConfig& cfg, bool write_artifacts) {
    const NamedGuidance* samg_config = nullptr;
    for (const auto& g : cfg.guidance)
        if (g.config.mode == GuidanceMode::Samg) {
            samg_config = &g;
            break;
        }
    if (!samg_config)
        throw std::invalid_argument("energy-maps: config needs a samg guidance entry");

    const PixelGMM model = cfg.model();
    const ConditionField cond = cfg.condition();
    std::optional<DiffusionSchedule> schedule;
    if (cfg.solver.family == SolverSpec::Family::Ddim)
        schedule = linear_beta_schedule(cfg.solver.schedule_steps, cfg.solver.beta_start,
                                        cfg.solver.beta_end);
    Trajectory traj = run_trajectory(cfg, model, cond, schedule ? &*schedule : nullptr,
                                     samg_config->config, cfg.seed_begin);

    const fs::path dir = fs::path(cfg.out_dir) / "energy_maps";
    std::ofstream index;
    if (write_artifacts) {
        fs::create_directories(dir);
        index.open((dir / "index.csv").string());
        index.precision(17);
        index << "record,t,energy_file,omega_file,E_min,E_max,E_mean,Omega_min,Omega_max,"
                 "Omega_mean\n";
    }

    EnergyMapStats stats;
    stats.records = static_cast<long>(traj.trace.records.size());
    stats.late_records = std::max<long>(1, (stats.records + 4) / 5);

    double inside_sum = 0.0, outside_sum = 0.0;
    long inside_n = 0, outside_n = 0;
    for (long i = 0; i < stats.records; ++i) {
        const auto& record = traj.trace.records[static_cast<std::size_t>(i)];
        if (write_artifacts) {
            std::ostringstream tag;
            tag << std::setw(3) << std::setfill('0') << i;
            const std::string energy_file = "energy_" + tag.str() + ".pgm";
            const std::string omega_file = "omega_" + tag.str() + ".pgm";
            write_pgm((dir / energy_file).string(), record.energy);
            write_pgm((dir / omega_file).string(), record.omega);
            index << i << ',' << record.t << ',' << energy_file << ',' << omega_file << ','
                  << record.energy.array().minCoeff() << ',' << record.energy.array().maxCoeff()
                  << ',' << record.energy.array().mean() << ','
                  << record.omega.array().minCoeff() << ',' << record.omega.array().maxCoeff()
                  << ',' << record.omega.array().mean() << '\n';
        }
        if (i >= stats.records - stats.late_records) {
            for (Eigen::Index p = 0; p < record.energy.pixels(); ++p) {
                if (cond.mask_at(p) > cfg.mask_threshold) {
                    inside_sum += record.energy.flat()[p];
                    ++inside_n;
                } else {
                    outside_sum += record.energy.flat()[p];
                    ++outside_n;
                }
            }
        }
    }
    if (inside_n > 0) stats.late_mean_inside = inside_sum / static_cast<double>(inside_n);
    if (outside_n > 0) stats.late_mean_outside = outside_sum / static_cast<double>(outside_n);
    return stats;
}

// ---------------------------------------------------------------------------
// Verification suite
// ---------------------------------------------------------------------------

namespace {

PixelGMM random_gmm(std::mt19937_64& rng, int channels, int components) {
    std::uniform_real_distribution<double> mean_dist(-2.0, 2.0);
    std::uniform_real_distribution<double> sigma_dist(0.3, 1.2);
    std::uniform_real_distribution<double> weight_dist(0.2, 1.0);
    Eigen::MatrixXd means(channels, components);
    for (int k = 0; k < components; ++k)
        for (int c = 0; c < channels; ++c) means(c, k) = mean_dist(rng);
    Eigen::VectorXd w(components);
    for (int k = 0; k < components; ++k) w[k] = weight_dist(rng);
    w /= w.sum();
    return PixelGMM(means, sigma_dist(rng), w);
}

LatentField point_field(const Eigen::VectorXd& z) {
    LatentField f(z.size(), 1, 1);
    for (Eigen::Index c = 0; c < z.size(); ++c) f(c, 0, 0) = z[c];
    return f;
}

VerifyCheckRow check_gradient(std::uint64_t seed) {
    VerifyCheckRow row{"gradient", 0, 0, -1.0, false};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    auto s = linear_beta_schedule(100, 1e-3, 0.05);
    const double h = 1e-5;
    for (int trial = 0; trial < 100; ++trial) {
        const int channels = 1 + static_cast<int>(rng() % 4);
        const int components = 1 + static_cast<int>(rng() % 4);
        PixelGMM m = random_gmm(rng, channels, components);
        const int t = 1 + static_cast<int>(rng() % 100);
        Eigen::VectorXd z(channels);
        for (int c = 0; c < channels; ++c) z[c] = 1.5 * normal(rng);

        const LatentField eps = eps_prediction(m, ScoreQuery::at_step(point_field(z), t), s);
        Eigen::VectorXd analytic(channels);
        for (int c = 0; c < channels; ++c) analytic[c] = eps(c, 0, 0);

        Eigen::VectorXd fd(channels);
        for (int c = 0; c < channels; ++c) {
            Eigen::VectorXd zp = z, zm = z;
            zp[c] += h;
            zm[c] -= h;
            fd[c] = (log_density(m, ScoreQuery::at_step(point_field(zp), t), s)(0, 0) -
                     log_density(m, ScoreQuery::at_step(point_field(zm), t), s)(0, 0)) /
                    (2.0 * h);
        }
        fd *= -std::sqrt(1.0 - s.alpha_bar(t));
        const double rel = (analytic - fd).norm() / std::max(analytic.norm(), 1e-8);
        row.max_slack = std::max(row.max_slack, rel - 1e-5);
        if (rel > 1e-5) ++row.violations;
        ++row.points;
    }
    row.pass = row.violations == 0;
    return row;
}

VerifyCheckRow check_hessian(std::uint64_t seed) {
    VerifyCheckRow row{"hessian", 0, 0, -1.0, false};
    std::mt19937_64 rng(seed + 1);
    std::normal_distribution<double> normal;
    auto s = linear_beta_schedule(100, 1e-3, 0.05);
    const double h = 1e-5;
    for (int trial = 0; trial < 100; ++trial) {
        const int channels = 1 + static_cast<int>(rng() % 4);
        const int components = 1 + static_cast<int>(rng() % 4);
        PixelGMM m = random_gmm(rng, channels, components);
        const int t = 1 + static_cast<int>(rng() % 100);
        Eigen::VectorXd z(channels);
        for (int c = 0; c < channels; ++c) z[c] = 1.5 * normal(rng);

        const auto hessians = score_hessian(m, ScoreQuery::at_step(point_field(z), t), s);
        const auto params = marginal_params(m, s, t);
        Eigen::MatrixXd fd(channels, channels);
        for (int c = 0; c < channels; ++c) {
            Eigen::VectorXd zp = z, zm = z;
            zp[c] += h;
            zm[c] -= h;
            const Eigen::VectorXd sp = detail::pixel_score<double>(
                params.means, params.variance, m.base_weights(), zp.array());
            const Eigen::VectorXd sm = detail::pixel_score<double>(
                params.means, params.variance, m.base_weights(), zm.array());
            fd.col(c) = (sp - sm) / (2.0 * h);
        }
        fd = 0.5 * (fd + fd.transpose()).eval();
        const double rel = (hessians[0] - fd).norm() / std::max(fd.norm(), 1e-8);
        row.max_slack = std::max(row.max_slack, rel - 1e-4);
        if (rel > 1e-4) ++row.violations;
        ++row.points;
    }
    row.pass = row.violations == 0;
    return row;
}

VerifyCheckRow check_deviation() {
    VerifyCheckRow row{"deviation", 0, 0, -1.0, false};
    for (double radius : {0.5, 1.0, 2.0}) {
        for (int d : {2, 3, 8}) {
            SphereManifold m(radius, d);
            std::vector<double> steps;
            for (int i = 0; i < 24; ++i)
                steps.push_back(1e-3 * radius * std::pow(100.0, i / 23.0));
            const auto report = fit_deviation_law(m, steps);
            const double exp_slack = std::abs(report.exponent - 2.0) - 0.02;
            const double coef_slack =
                std::abs(report.coefficient - report.kappa_half_reference) /
                    report.kappa_half_reference -
                0.01;
            row.max_slack = std::max({row.max_slack, exp_slack, coef_slack});
            if (exp_slack > 0.0 || coef_slack > 0.0) ++row.violations;
            ++row.points;
        }
    }
    row.pass = row.violations == 0;
    return row;
}

VerifyCheckRow check_taylor(std::uint64_t seed) {
    VerifyCheckRow row{"taylor", 0, 0, -1.0, false};
    std::mt19937_64 rng(seed + 2);
    std::uniform_real_distribution<double> log_dist(std::log(1e-6), std::log(1e6));
    for (int trial = 0; trial < 100000; ++trial) {
        const double energy = std::exp(log_dist(rng));
        const double eta0 = std::exp(log_dist(rng));
        const auto [c1, c2] = taylor_bound_constants(eta0);
        const double g = c1 - c2 * energy;
        const double f = 1.0 / std::sqrt(energy);
        const double tol = 1e-12 * (std::abs(c1) + std::abs(c2 * energy) + std::abs(f));
        row.max_slack = std::max(row.max_slack, g - f - tol);
        if (g > f + tol) ++row.violations;
        ++row.points;
    }
    row.pass = row.violations == 0;
    return row;
}

VerifyCheckRow check_gronwall(std::uint64_t seed) {
    VerifyCheckRow row{"gronwall", 0, 0, -1.0, false};
    std::mt19937_64 rng(seed + 3);
    std::uniform_real_distribution<double> delta_dist(1e-6, 1.0);
    std::uniform_real_distribution<double> l_dist(0.01, 5.0);
    std::uniform_real_distribution<double> h_dist(1e-4, 0.5);
    for (int trial = 0; trial < 1000; ++trial) {
        const double delta = delta_dist(rng);
        const double lipschitz = l_dist(rng);
        const double h = h_dist(rng);
        const int n = static_cast<int>(rng() % 1000) + 1;
        const double rec = simulate_error_recursion(delta, lipschitz, h, n);
        const double bound = gronwall_bound(delta, lipschitz, h, n);
        const double tol = 1e-12 * bound;
        row.max_slack = std::max(row.max_slack, rec - bound - tol);
        if (rec > bound + tol) ++row.violations;
        ++row.points;
    }
    row.pass = row.violations == 0;
    return row;
}

VerifyCheckRow check_spectral(std::uint64_t seed, bool corrupt) {
    VerifyCheckRow row{"spectral", 0, 0, -1.0, false};
    std::mt19937_64 rng(seed + 4);
    std::normal_distribution<double> normal;
    auto s = linear_beta_schedule(100, 1e-3, 0.05);
    SpectralBoundOptions options;
    options.corrupt_hessian_sign = corrupt;
    while (row.points < 1000) {
        PixelGMM m = random_gmm(rng, 2, 1 + static_cast<int>(rng() % 3));
        std::vector<Eigen::VectorXd> points;
        for (int i = 0; i < 50; ++i) {
            Eigen::VectorXd z(2);
            z << 1.5 * normal(rng), 1.5 * normal(rng);
            points.push_back(z);
        }
        const int t = 1 + static_cast<int>(rng() % 100);
        const auto report = verify_spectral_bound(m, points, s, t, options);
        row.points += report.points_tested;
        row.violations += report.violations;
        row.max_slack = std::max(row.max_slack, report.max_slack - 1e-9);
    }
    row.pass = row.violations == 0;
    return row;
}

VerifyCheckRow check_spectral_equality(std::uint64_t seed) {
    // Isotropic single Gaussian: kappa equals rho(J)/||eps_u|| exactly.
    VerifyCheckRow row{"spectral_equality", 0, 0, -1.0, false};
    std::mt19937_64 rng(seed + 5);
    std::normal_distribution<double> normal;
    auto s = linear_beta_schedule(100, 1e-3, 0.05);
    Eigen::MatrixXd zero_mean = Eigen::MatrixXd::Zero(2, 1);
    PixelGMM m(zero_mean, 0.7, Eigen::VectorXd::Ones(1));
    const int t = 50;
    const auto params = marginal_params(m, s, t);
    const double noise_scale = std::sqrt(1.0 - s.alpha_bar(t));
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd z(2);
        z << normal(rng), normal(rng);
        if (z.norm() < 0.1) continue;
        const Eigen::VectorXd grad = detail::pixel_score<double>(
            params.means, params.variance, m.base_weights(), z.array());
        const Eigen::MatrixXd hess = detail::pixel_hessian<double>(
            params.means, params.variance, m.base_weights(), z.array());
        Eigen::VectorXd tangent(2);
        tangent << -grad[1], grad[0];
        tangent.normalize();
        const double kappa = level_set_curvature(grad, hess, tangent);
        const double rho = power_iteration_spectral_norm(Eigen::MatrixXd(-noise_scale * hess));
        const double bound = rho / (noise_scale * grad.norm());
        const double gap = std::abs(kappa - bound) / kappa;
        row.max_slack = std::max(row.max_slack, gap - 1e-6);
        if (gap > 1e-6) ++row.violations;
        ++row.points;
    }
    row.pass = row.violations == 0;
    return row;
}

VerifyCheckRow check_jensen(std::uint64_t seed) {
    VerifyCheckRow row{"jensen", 0, 0, -1.0, false};
    std::mt19937_64 rng(seed + 6);
    std::uniform_real_distribution<double> base_dist(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const Eigen::Index h = 5 + static_cast<Eigen::Index>(rng() % 8);
        const Eigen::Index w = 5 + static_cast<Eigen::Index>(rng() % 8);
        EnergyMap e(h, w);
        for (Eigen::Index y = 0; y < h; ++y)
            for (Eigen::Index x = 0; x < w; ++x) e(y, x) = base_dist(rng);
        const Eigen::Index sy = 1 + static_cast<Eigen::Index>(rng() % (h - 2));
        const Eigen::Index sx = 1 + static_cast<Eigen::Index>(rng() % (w - 2));
        e(sy, sx) = 2.0 + base_dist(rng);
        const auto report = jensen_smoothing_check(e, 3);
        row.points += report.maxima_checked;
        row.violations += report.energy_violations + report.scale_violations;
        // slack: how close any smoothed maximum came to not dropping
        const EnergyMap smoothed = box_smooth(e, 3);
        row.max_slack = std::max(row.max_slack, smoothed(sy, sx) - e(sy, sx));
    }
    row.pass = row.violations == 0;
    return row;
}

VerifyCheckRow check_flowbound(std::uint64_t seed) {
    VerifyCheckRow row{"flowbound", 0, 0, -1.0, false};
    std::mt19937_64 rng(seed + 7);
    std::uniform_real_distribution<double> pos(0.05, 5.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const double kappa = pos(rng), dt = 0.1 * pos(rng), energy = pos(rng);
        const double delta = 0.1 * pos(rng);
        const int channels = 1 + static_cast<int>(rng() % 8);

        // the omega ceiling saturates the deviation bound at exactly delta
        const double omega = flow_omega_limit(delta, kappa, dt, channels, energy);
        const double round_trip = flow_truncation_bound(kappa, omega, dt, channels, energy);
        const double rel = std::abs(round_trip - delta) / delta;

        // quadratic scaling in dt
        const double full = flow_truncation_bound(kappa, 1.0, dt, channels, energy);
        const double half = flow_truncation_bound(kappa, 1.0, dt / 2.0, channels, energy);
        const double scale_rel = std::abs(full - 4.0 * half) / full;

        const double slack = std::max(rel, scale_rel) - 1e-9;
        row.max_slack = std::max(row.max_slack, slack);
        if (slack > 0.0) ++row.violations;
        ++row.points;
    }
    row.pass = row.violations == 0;
    return row;
}

}  // namespace

std::vector<std::string> verification_check_names() {
    return {"gradient", "hessian",           "deviation", "taylor",
            "gronwall", "spectral",          "spectral_equality",
            "jensen",   "flowbound"};
}

VerifyReport run_verification(const VerifyOptions& options) {
    const auto names = verification_check_names();
    if (!options.only.empty() &&
        std::find(names.begin(), names.end(), options.only) == names.end()) {
        std::string known;
        for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown check '" + options.only + "' (known: " + known +
                                    ")");
    }
    const auto wanted = [&](const char* name) {
        return options.only.empty() || options.only == name;
    };

    VerifyReport report;
    if (wanted("gradient")) report.rows.push_back(check_gradient(options.seed));
    if (wanted("hessian")) report.rows.push_back(check_hessian(options.seed));
    if (wanted("deviation")) report.rows.push_back(check_deviation());
    if (wanted("taylor")) report.rows.push_back(check_taylor(options.seed));
    if (wanted("gronwall")) report.rows.push_back(check_gronwall(options.seed));
    if (wanted("spectral"))
        report.rows.push_back(check_spectral(options.seed, options.corrupt_hessian_sign));
    if (wanted("spectral_equality"))
        report.rows.push_back(check_spectral_equality(options.seed));
    if (wanted("jensen")) report.rows.push_back(check_jensen(options.seed));
    if (wanted("flowbound")) report.rows.push_back(check_flowbound(options.seed));

    if (!options.out_dir.empty()) {
        fs::create_directories(options.out_dir);
        report.write_csv((fs::path(options.out_dir) / "verify_report.csv").string());
    }
    return report;
}

bool VerifyReport::all_pass() const {
    for (const auto& row : rows)
        if (!row.pass) return false;
    return !rows.empty();
}

void VerifyReport::print(std::ostream& os) const {
    for (const auto& row : rows) {
        os << (row.pass ? "[PASS] " : "[FAIL] ") << std::left << std::setw(18) << row.name
           << " points=" << std::setw(7) << row.points << " violations=" << std::setw(4)
           << row.violations << " max_slack=" << std::scientific << std::setprecision(3)
           << row.max_slack << std::defaultfloat << '\n';
    }
}

void VerifyReport::write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os.precision(17);
    os << "name,points,violations,max_slack\n";
    for (const auto& row : rows)
        os << row.name << ',' << row.points << ',' << row.violations << ',' << row.max_slack
           << '\n';
}

AblationTable cmd_ablate(const ExperimentConfig& cfg, bool write_artifacts) {
    if (cfg.guidance.size() < 2)
        throw std::invalid_argument("ablate: need at least two guidance configs in the grid");

    const SampleRun run = cmd_sample(cfg, false);

    std::vector<ConfigAggregate> aggregates;
    for (const auto& agg : run.aggregates) aggregates.push_back(agg.metrics);
    const auto pareto = pareto_table(aggregates);

    AblationTable table;
    for (const auto& row : pareto) {
        AblationRow out;
        out.name = row.aggregate.name;
        out.alignment_rate = row.aggregate.alignment_rate;
        out.mean_distance = row.aggregate.mean_distance;
        out.p95_distance = row.aggregate.p95_distance;
        out.off_manifold_rate = row.aggregate.off_manifold_rate;
        out.dominated = row.dominated;
        for (const auto& agg : run.aggregates)
            if (agg.metrics.name == out.name) out.top_decile_distance = agg.top_decile_distance;
        table.rows.push_back(std::move(out));
    }

    if (write_artifacts) {
        fs::create_directories(cfg.out_dir);
        table.write_csv((fs::path(cfg.out_dir) / "ablation.csv").string());
    }
    return table;
}

void AblationTable::print(std::ostream& os) const {
    os << std::left << std::setw(18) << "config" << std::right << std::setw(12) << "align"
       << std::setw(12) << "mean_dist" << std::setw(12) << "p95_dist" << std::setw(12)
       << "off_rate" << std::setw(14) << "topdec_dist" << std::setw(12) << "dominated" << '\n';
    for (const auto& row : rows) {
        os << std::left << std::setw(18) << row.name << std::right << std::fixed
           << std::setprecision(4) << std::setw(12) << row.alignment_rate << std::setw(12)
           << row.mean_distance << std::setw(12) << row.p95_distance << std::setw(12)
           << row.off_manifold_rate << std::setw(14) << row.top_decile_distance << std::setw(12)
           << (row.dominated ? "yes" : "no") << std::defaultfloat << '\n';
    }
}

void AblationTable::write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os.precision(17);
    os << "config,alignment_rate,mean_distance,p95_distance,off_manifold_rate,"
          "top_decile_distance,dominated\n";
    for (const auto& row : rows)
        os << row.name << ',' << row.alignment_rate << ',' << row.mean_distance << ','
           << row.p95_distance << ',' << row.off_manifold_rate << ','
           << row.top_decile_distance << ',' << (row.dominated ? 1 : 0) << '\n';
}

}  // namespace samg
