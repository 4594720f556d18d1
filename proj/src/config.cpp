#include "samg/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace samg {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
    throw std::invalid_argument("config field '" + field + "': " + what);
}

const json& require(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) fail(path + key, "missing");
    return j.at(key);
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<int>();
}

GridArray<double> parse_grid(const json& j, int height, int width, const std::string& path) {
    if (!j.is_array() || static_cast<int>(j.size()) != height)
        fail(path, "expected " + std::to_string(height) + " rows");
    GridArray<double> grid(height, width);
    for (int y = 0; y < height; ++y) {
        const json& row = j.at(static_cast<std::size_t>(y));
        if (!row.is_array() || static_cast<int>(row.size()) != width)
            fail(path, "row " + std::to_string(y) + " must have " + std::to_string(width) +
                           " values");
        for (int x = 0; x < width; ++x)
            grid(y, x) = number(row.at(static_cast<std::size_t>(x)),
                                path + "[" + std::to_string(y) + "]");
    }
    return grid;
}

GridArray<double> disk_mask(const json& j, int height, int width, const std::string& path) {
    const double cx = j.contains("cx") ? number(j.at("cx"), path + ".cx")
                                       : (static_cast<double>(width) - 1.0) / 2.0;
    const double cy = j.contains("cy") ? number(j.at("cy"), path + ".cy")
                                       : (static_cast<double>(height) - 1.0) / 2.0;
    const double radius = number(require(j, "radius", path + "."), path + ".radius");
    const double inside = j.contains("inside") ? number(j.at("inside"), path + ".inside") : 1.0;
    const double outside =
        j.contains("outside") ? number(j.at("outside"), path + ".outside") : 0.0;
    const bool has_halo = j.contains("halo_radius");
    const double halo_radius =
        has_halo ? number(j.at("halo_radius"), path + ".halo_radius") : radius;
    const double halo = j.contains("halo") ? number(j.at("halo"), path + ".halo") : outside;
    if (has_halo && halo_radius < radius) fail(path + ".halo_radius", "must be >= radius");

    GridArray<double> grid(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double r = std::hypot(static_cast<double>(x) - cx,
                                        static_cast<double>(y) - cy);
            grid(y, x) = (r <= radius) ? inside : (has_halo && r <= halo_radius) ? halo : outside;
        }
    return grid;
}

GridArray<double> half_mask(const json& j, int height, int width, const std::string& path) {
    const std::string axis =
        j.contains("axis") ? j.at("axis").get<std::string>() : std::string("x");
    const int span = (axis == "x") ? width : height;
    const int split = j.contains("split") ? integer(j.at("split"), path + ".split") : span / 2;
    const double first = j.contains("first") ? number(j.at("first"), path + ".first") : 1.0;
    const double second = j.contains("second") ? number(j.at("second"), path + ".second") : 0.0;
    if (axis != "x" && axis != "y") fail(path + ".axis", "must be 'x' or 'y'");

    GridArray<double> grid(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const int coord = (axis == "x") ? x : y;
            grid(y, x) = coord < split ? first : second;
        }
    return grid;
}

GridArray<double> stripes_mask(const json& j, int height, int width, const std::string& path) {
    const std::string axis =
        j.contains("axis") ? j.at("axis").get<std::string>() : std::string("x");
    const int period = j.contains("period") ? integer(j.at("period"), path + ".period") : 2;
    const double high = j.contains("high") ? number(j.at("high"), path + ".high") : 1.0;
    const double low = j.contains("low") ? number(j.at("low"), path + ".low") : 0.0;
    if (period < 1) fail(path + ".period", "must be positive");
    if (axis != "x" && axis != "y") fail(path + ".axis", "must be 'x' or 'y'");

    GridArray<double> grid(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const int coord = (axis == "x") ? x : y;
            grid(y, x) = ((coord / period) % 2 == 0) ? high : low;
        }
    return grid;
}

GridArray<double> parse_mask(const json& j, int height, int width, const std::string& path) {
    if (j.is_number()) {
        GridArray<double> grid(height, width);
        grid.setConstant(j.get<double>());
        return grid;
    }
    if (j.is_array()) return parse_grid(j, height, width, path);
    if (!j.is_object()) fail(path, "expected a number, grid, or generator object");
    const std::string type = require(j, "type", path + ".").get<std::string>();
    if (type == "disk") return disk_mask(j, height, width, path);
    if (type == "half") return half_mask(j, height, width, path);
    if (type == "stripes") return stripes_mask(j, height, width, path);
    if (type == "grid") return parse_grid(require(j, "values", path + "."), height, width,
                                          path + ".values");
    fail(path + ".type", "unknown generator '" + type + "'");
}

ConditionField::IndexArray parse_target(const json& j, int height, int width, int components,
                                        const std::string& path) {
    ConditionField::IndexArray target(height, width);
    if (j.is_number_integer()) {
        const int k = j.get<int>();
        if (k < 0 || k >= components) fail(path, "component index out of range");
        target.setConstant(k);
        return target;
    }
    if (!j.is_array() || static_cast<int>(j.size()) != height)
        fail(path, "expected an integer or a grid of " + std::to_string(height) + " rows");
    for (int y = 0; y < height; ++y) {
        const json& row = j.at(static_cast<std::size_t>(y));
        if (!row.is_array() || static_cast<int>(row.size()) != width)
            fail(path, "row " + std::to_string(y) + " must have " + std::to_string(width) +
                           " values");
        for (int x = 0; x < width; ++x) {
            const int k = integer(row.at(static_cast<std::size_t>(x)), path);
            if (k < 0 || k >= components) fail(path, "component index out of range");
            target(y, x) = k;
        }
    }
    return target;
}

GuidanceConfig parse_guidance(const json& j, const std::string& path) {
    const std::string mode = require(j, "mode", path + ".").get<std::string>();
    if (mode == "uniform") {
        GuidanceConfig cfg =
            GuidanceConfig::uniform(number(require(j, "omega", path + "."), path + ".omega"));
        cfg.validate();
        return cfg;
    }
    if (mode == "samg") {
        GuidanceConfig cfg = GuidanceConfig::samg(
            number(require(j, "omega_min", path + "."), path + ".omega_min"),
            number(require(j, "omega_max", path + "."), path + ".omega_max"));
        if (j.contains("kernel")) cfg.kernel = integer(j.at("kernel"), path + ".kernel");
        if (j.contains("tau")) cfg.tau = number(j.at("tau"), path + ".tau");
        cfg.validate();
        return cfg;
    }
    fail(path + ".mode", "must be 'uniform' or 'samg'");
}

std::string default_name(const GuidanceConfig& cfg) {
    std::ostringstream os;
    if (cfg.mode == GuidanceMode::Uniform) {
        os << "cfg_w" << cfg.omega;
    } else {
        os << "samg_w" << cfg.omega_min << "-" << cfg.omega_max << "_k" << cfg.kernel;
    }
    return os.str();
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config parse error: ") + e.what());
    }

    ExperimentConfig cfg;
    const json& model = require(root, "model", "");
    cfg.channels = integer(require(model, "channels", "model."), "model.channels");
    cfg.height = integer(require(model, "height", "model."), "model.height");
    cfg.width = integer(require(model, "width", "model."), "model.width");
    if (cfg.channels < 1 || cfg.height < 1 || cfg.width < 1)
        fail("model", "dimensions must be positive");

    const json& means = require(model, "means", "model.");
    if (!means.is_array() || means.empty()) fail("model.means", "expected a list of components");
    const int components = static_cast<int>(means.size());
    cfg.means.resize(cfg.channels, components);
    for (int k = 0; k < components; ++k) {
        const json& mu = means.at(static_cast<std::size_t>(k));
        if (!mu.is_array() || static_cast<int>(mu.size()) != cfg.channels)
            fail("model.means", "component " + std::to_string(k) + " must have " +
                                    std::to_string(cfg.channels) + " values");
        for (int c = 0; c < cfg.channels; ++c)
            cfg.means(c, k) = number(mu.at(static_cast<std::size_t>(c)), "model.means");
    }

    cfg.sigma0 = number(require(model, "sigma0", "model."), "model.sigma0");
    if (model.contains("weights")) {
        const json& w = model.at("weights");
        if (!w.is_array() || static_cast<int>(w.size()) != components)
            fail("model.weights", "must match the component count");
        cfg.weights.resize(components);
        for (int k = 0; k < components; ++k)
            cfg.weights[k] = number(w.at(static_cast<std::size_t>(k)), "model.weights");
    } else {
        cfg.weights = Eigen::VectorXd::Constant(components, 1.0 / components);
    }

    cfg.mask = parse_mask(require(model, "mask", "model."), cfg.height, cfg.width, "model.mask");
    cfg.target = parse_target(require(model, "target", "model."), cfg.height, cfg.width,
                              components, "model.target");

    if (root.contains("solver")) {
        const json& solver = root.at("solver");
        if (solver.contains("family")) {
            const std::string family = solver.at("family").get<std::string>();
            if (family == "ddim")
                cfg.solver.family = SolverSpec::Family::Ddim;
            else if (family == "euler")
                cfg.solver.family = SolverSpec::Family::Euler;
            else
                fail("solver.family", "must be 'ddim' or 'euler'");
        }
        if (solver.contains("steps"))
            cfg.solver.steps = integer(solver.at("steps"), "solver.steps");
        if (solver.contains("schedule_steps"))
            cfg.solver.schedule_steps =
                integer(solver.at("schedule_steps"), "solver.schedule_steps");
        if (solver.contains("beta_start"))
            cfg.solver.beta_start = number(solver.at("beta_start"), "solver.beta_start");
        if (solver.contains("beta_end"))
            cfg.solver.beta_end = number(solver.at("beta_end"), "solver.beta_end");
        if (cfg.solver.steps < 1) fail("solver.steps", "must be positive");
    }

    const json& guidance = require(root, "guidance", "");
    if (!guidance.is_array() || guidance.empty())
        fail("guidance", "expected a non-empty list of guidance configs");
    for (std::size_t i = 0; i < guidance.size(); ++i) {
        const std::string path = "guidance[" + std::to_string(i) + "]";
        NamedGuidance named;
        named.config = parse_guidance(guidance.at(i), path);
        named.name = guidance.at(i).contains("name")
                         ? guidance.at(i).at("name").get<std::string>()
                         : default_name(named.config);
        cfg.guidance.push_back(std::move(named));
    }

    if (root.contains("seeds")) {
        const json& seeds = root.at("seeds");
        cfg.seed_begin = static_cast<std::uint64_t>(
            integer(require(seeds, "begin", "seeds."), "seeds.begin"));
        cfg.seed_end =
            static_cast<std::uint64_t>(integer(require(seeds, "end", "seeds."), "seeds.end"));
        if (cfg.seed_end <= cfg.seed_begin) fail("seeds", "need end > begin");
    }
    if (root.contains("mask_threshold"))
        cfg.mask_threshold = number(root.at("mask_threshold"), "mask_threshold");
    if (root.contains("delta")) cfg.delta = number(root.at("delta"), "delta");
    if (root.contains("output")) cfg.out_dir = root.at("output").get<std::string>();
    if (root.contains("threads")) cfg.threads = integer(root.at("threads"), "threads");
    if (cfg.threads < 1) fail("threads", "must be positive");

    // surface invariant violations (weights, sigma0, bounds) immediately
    cfg.model();
    cfg.condition();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << is.rdbuf();
    return parse_config(buffer.str());
}

ExperimentConfig default_testbed() {
    ExperimentConfig cfg;
    cfg.channels = 4;
    cfg.height = 16;
    cfg.width = 16;
    // Hadamard sign patterns: pairwise distance 2.5 * sqrt(2), 35 sigma0 apart.
    cfg.means.resize(4, 4);
    cfg.means << 1, 1, 1, 1,
                 1, -1, 1, -1,
                 1, 1, -1, -1,
                 1, -1, -1, 1;
    cfg.means *= 2.5 / 2.0;
    cfg.sigma0 = 0.1;
    cfg.weights = Eigen::VectorXd::Constant(4, 0.25);

    // Disk with a strong core, a weaker sharp-edged halo, and a faint exterior.
    GridArray<double> mask(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const double r = std::hypot(x - 7.5, y - 7.5);
            mask(y, x) = (r <= 3.2) ? 1.0 : (r <= 5.4) ? 0.55 : 0.05;
        }
    cfg.mask = mask;
    cfg.target = ConditionField::IndexArray::Constant(16, 16, 2);

    cfg.solver.family = SolverSpec::Family::Ddim;
    cfg.solver.steps = 50;
    cfg.solver.schedule_steps = 1000;
    cfg.solver.beta_start = 1e-4;
    cfg.solver.beta_end = 0.02;

    cfg.guidance.push_back({"cfg_w2", GuidanceConfig::uniform(2.0)});
    cfg.guidance.push_back({"cfg_w8", GuidanceConfig::uniform(8.0)});
    cfg.guidance.push_back({"samg_w2-8_k1", GuidanceConfig::samg(2.0, 8.0, 1)});
    cfg.guidance.push_back({"samg_w2-8_k3", GuidanceConfig::samg(2.0, 8.0, 3)});

    cfg.seed_begin = 0;
    cfg.seed_end = 64;
    cfg.mask_threshold = 0.5;
    cfg.delta = 0.005;
    cfg.out_dir = "out";
    cfg.threads = 1;
    return cfg;
}

}  // namespace samg
