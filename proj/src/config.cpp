#include "qident/config.hpp"

#include "qident/errors.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace qident {
namespace {

void check_keys(const YAML::Node& node, const std::string& section, const std::set<std::string>& allowed) {
    if (!node.IsMap()) throw ConfigError(section, "expected a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) throw ConfigError(section + "." + key, "unknown key");
    }
}

double as_real(const YAML::Node& node, const std::string& field) {
    double v = 0.0;
    try {
        v = node.as<double>();
    } catch (const YAML::Exception&) {
        throw ConfigError(field, "expected a number");
    }
    if (!std::isfinite(v)) throw ConfigError(field, "must be finite");
    return v;
}

std::uint64_t as_count(const YAML::Node& node, const std::string& field) {
    long long v = 0;
    try {
        v = node.as<long long>();
    } catch (const YAML::Exception&) {
        throw ConfigError(field, "expected a non-negative integer");
    }
    if (v < 0) throw ConfigError(field, "expected a non-negative integer");
    return static_cast<std::uint64_t>(v);
}

std::string as_text(const YAML::Node& node, const std::string& field) {
    if (!node.IsScalar()) throw ConfigError(field, "expected a string");
    return node.as<std::string>();
}

Vec as_vec(const YAML::Node& node, const std::string& field) {
    if (!node.IsSequence()) throw ConfigError(field, "expected a list of numbers");
    Vec out;
    for (std::size_t i = 0; i < node.size(); ++i)
        out.push_back(as_real(node[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<Vec> as_rows(const YAML::Node& node, const std::string& field) {
    if (!node.IsSequence()) throw ConfigError(field, "expected a list of rows");
    std::vector<Vec> rows;
    for (std::size_t i = 0; i < node.size(); ++i) rows.push_back(as_vec(node[i], field + "[" + std::to_string(i) + "]"));
    return rows;
}

std::vector<Vec> read_rows_csv(const std::filesystem::path& path, const std::string& field) {
    std::ifstream in(path);
    if (!in) throw ConfigError(field, "cannot open '" + path.string() + "'");
    std::vector<Vec> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        Vec row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ConfigError(field, path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

bool ExperimentConfig::runs(EstimatorKind kind) const {
    return std::find(estimators.begin(), estimators.end(), kind) != estimators.end();
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError("config", e.what());
    }
    if (!root.IsMap()) throw ConfigError("config", "expected a mapping of sections");
    check_keys(root, "config", {"system", "regressors", "run", "wqnp", "init"});

    ExperimentConfig cfg;
    cfg.estimators.clear();
    cfg.trials = 1;
    cfg.horizon = 0;

    const YAML::Node sys = root["system"];
    if (!sys) throw ConfigError("system", "section is required");
    check_keys(sys, "system", {"thresholds", "sigma", "theta", "box_lo", "box_hi"});
    for (const char* key : {"thresholds", "sigma", "theta", "box_lo", "box_hi"})
        if (!sys[key]) throw ConfigError(std::string("system.") + key, "is required");
    cfg.thresholds = as_vec(sys["thresholds"], "system.thresholds");
    cfg.sigma = as_real(sys["sigma"], "system.sigma");
    cfg.theta = as_vec(sys["theta"], "system.theta");
    cfg.box_lo = as_vec(sys["box_lo"], "system.box_lo");
    cfg.box_hi = as_vec(sys["box_hi"], "system.box_hi");

    if (const YAML::Node reg = root["regressors"]) {
        check_keys(reg, "regressors", {"kind", "seed", "sequence", "file"});
        if (reg["kind"]) {
            try {
                cfg.regressor_kind = regressor_kind_from_string(as_text(reg["kind"], "regressors.kind"));
            } catch (const DomainError& e) {
                throw ConfigError("regressors.kind", e.what());
            }
        }
        if (reg["seed"]) cfg.seed = as_count(reg["seed"], "regressors.seed");
        if (reg["sequence"] && reg["file"])
            throw ConfigError("regressors.file", "give either sequence or file, not both");
        if (reg["sequence"]) cfg.sequence = as_rows(reg["sequence"], "regressors.sequence");
        if (reg["file"]) {
            std::filesystem::path p = as_text(reg["file"], "regressors.file");
            if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
            cfg.sequence = read_rows_csv(p, "regressors.file");
        }
    }

    const YAML::Node run = root["run"];
    if (!run) throw ConfigError("run", "section is required");
    check_keys(run, "run", {"trials", "horizon", "checkpoints", "estimators", "name", "outdir"});
    if (!run["horizon"]) throw ConfigError("run.horizon", "is required");
    cfg.horizon = as_count(run["horizon"], "run.horizon");
    if (run["trials"]) cfg.trials = as_count(run["trials"], "run.trials");
    if (run["checkpoints"]) {
        const YAML::Node cp = run["checkpoints"];
        if (!cp.IsSequence()) throw ConfigError("run.checkpoints", "expected a list of integers");
        for (std::size_t i = 0; i < cp.size(); ++i)
            cfg.checkpoints.push_back(as_count(cp[i], "run.checkpoints[" + std::to_string(i) + "]"));
    }
    if (run["estimators"]) {
        const YAML::Node es = run["estimators"];
        if (!es.IsSequence()) throw ConfigError("run.estimators", "expected a list");
        for (std::size_t i = 0; i < es.size(); ++i) {
            const std::string field = "run.estimators[" + std::to_string(i) + "]";
            try {
                cfg.estimators.push_back(estimator_kind_from_string(as_text(es[i], field)));
            } catch (const DomainError& e) {
                throw ConfigError(field, e.what());
            }
        }
    } else {
        cfg.estimators = {EstimatorKind::Wqnp, EstimatorKind::Ibid};
    }
    if (run["name"]) cfg.name = as_text(run["name"], "run.name");
    if (run["outdir"]) cfg.outdir = as_text(run["outdir"], "run.outdir");

    if (const YAML::Node w = root["wqnp"]) {
        check_keys(w, "wqnp", {"alphas", "beta"});
        if (w["alphas"]) cfg.alphas = as_vec(w["alphas"], "wqnp.alphas");
        if (w["beta"]) cfg.beta = as_real(w["beta"], "wqnp.beta");
    }

    if (const YAML::Node init = root["init"]) {
        check_keys(init, "init", {"theta0", "p0_scale"});
        if (init["theta0"]) cfg.theta0 = as_vec(init["theta0"], "init.theta0");
        if (init["p0_scale"]) cfg.p0_scale = as_real(init["p0_scale"], "init.p0_scale");
    }

    validate_config(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

void validate_config(const ExperimentConfig& cfg) {
    const std::size_t n = cfg.theta.size();
    if (n == 0 || n > kMaxOrder) throw ConfigError("system.theta", "dimension must be in 1.." + std::to_string(kMaxOrder));
    if (cfg.thresholds.empty()) throw ConfigError("system.thresholds", "at least one threshold is required");
    for (std::size_t i = 1; i < cfg.thresholds.size(); ++i)
        if (!(cfg.thresholds[i - 1] < cfg.thresholds[i]))
            throw ConfigError("system.thresholds", "must be strictly increasing");
    if (!(cfg.sigma > 0.0) || !std::isfinite(cfg.sigma)) throw ConfigError("system.sigma", "must be positive");
    if (cfg.box_lo.size() != n) throw ConfigError("system.box_lo", "length differs from system.theta");
    if (cfg.box_hi.size() != n) throw ConfigError("system.box_hi", "length differs from system.theta");
    for (std::size_t i = 0; i < n; ++i) {
        if (cfg.box_lo[i] > cfg.box_hi[i])
            throw ConfigError("system.box_hi", "below box_lo in coordinate " + std::to_string(i));
        if (cfg.theta[i] < cfg.box_lo[i] || cfg.theta[i] > cfg.box_hi[i])
            throw ConfigError("system.theta", "outside the box in coordinate " + std::to_string(i));
    }

    switch (cfg.regressor_kind) {
    case RegressorKind::Example1Cycle:
        if (n != 3) throw ConfigError("regressors.kind", "example1-cycle needs a 3-parameter system");
        if (!cfg.sequence.empty()) throw ConfigError("regressors.sequence", "only used with fixed-sequence");
        break;
    case RegressorKind::FixedSequence:
        if (cfg.sequence.empty()) throw ConfigError("regressors.sequence", "fixed-sequence needs rows");
        for (std::size_t i = 0; i < cfg.sequence.size(); ++i)
            if (cfg.sequence[i].size() != n)
                throw ConfigError("regressors.sequence[" + std::to_string(i) + "]", "length differs from system.theta");
        break;
    case RegressorKind::UserSupplied:
        throw ConfigError("regressors.kind", "user-supplied regressors are only available through the library API");
    }

    if (cfg.trials < 1) throw ConfigError("run.trials", "must be >= 1");
    if (cfg.horizon < n) throw ConfigError("run.horizon", "must be >= n = " + std::to_string(n));
    if (!cfg.checkpoints.empty()) {
        if (cfg.checkpoints.front() < n)
            throw ConfigError("run.checkpoints", "first checkpoint must be >= n = " + std::to_string(n));
        for (std::size_t i = 1; i < cfg.checkpoints.size(); ++i)
            if (!(cfg.checkpoints[i - 1] < cfg.checkpoints[i]))
                throw ConfigError("run.checkpoints", "must be strictly increasing");
        if (cfg.checkpoints.back() != cfg.horizon)
            throw ConfigError("run.checkpoints", "last checkpoint must equal run.horizon");
    }
    if (cfg.estimators.empty()) throw ConfigError("run.estimators", "at least one estimator is required");
    for (std::size_t i = 0; i < cfg.estimators.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (cfg.estimators[i] == cfg.estimators[j])
                throw ConfigError("run.estimators", "duplicate entry " + to_string(cfg.estimators[i]));
    if (cfg.name.empty() || cfg.name.find('/') != std::string::npos)
        throw ConfigError("run.name", "must be a non-empty file stem");

    if (cfg.runs(EstimatorKind::Wqnp)) {
        if (cfg.alphas.size() != cfg.thresholds.size() + 1)
            throw ConfigError("wqnp.alphas", "needs one weight per cell (" +
                                                 std::to_string(cfg.thresholds.size() + 1) + ")");
        if (!(cfg.beta > 0.0)) throw ConfigError("wqnp.beta", "must be positive");
    }

    if (cfg.theta0 && cfg.theta0->size() != n) throw ConfigError("init.theta0", "length differs from system.theta");
    if (!(cfg.p0_scale > 0.0) || !std::isfinite(cfg.p0_scale)) throw ConfigError("init.p0_scale", "must be positive");
}

std::vector<std::size_t> default_checkpoints(std::size_t k_max, std::size_t n) {
    const std::size_t lo = std::max<std::size_t>(10, n);
    if (k_max <= lo) return {k_max};
    constexpr int kPoints = 40;
    const double a = std::log10(static_cast<double>(lo));
    const double b = std::log10(static_cast<double>(k_max));
    std::vector<std::size_t> out;
    for (int i = 0; i < kPoints; ++i) {
        const auto k = static_cast<std::size_t>(std::llround(std::pow(10.0, a + (b - a) * i / (kPoints - 1))));
        if (out.empty() || k > out.back()) out.push_back(std::min(k, k_max));
    }
    if (out.back() != k_max) out.push_back(k_max);
    return out;
}

std::vector<std::size_t> resolved_checkpoints(const ExperimentConfig& cfg) {
    return cfg.checkpoints.empty() ? default_checkpoints(cfg.horizon, cfg.dim()) : cfg.checkpoints;
}

RegressorStream make_regressors(const ExperimentConfig& cfg) {
    switch (cfg.regressor_kind) {
    case RegressorKind::Example1Cycle: return RegressorStream::example1();
    case RegressorKind::FixedSequence: return RegressorStream::fixed_sequence(cfg.sequence);
    case RegressorKind::UserSupplied: break;
    }
    throw ConfigError("regressors.kind", "user-supplied regressors are only available through the library API");
}

ExperimentConfig example1_config() {
    ExperimentConfig cfg;
    cfg.thresholds = {-1.0, 0.0, 0.5};
    cfg.sigma = 1.5;
    cfg.theta = {-0.5, 1.0, -1.0};
    cfg.box_lo = {-3.0, 0.0, -2.0};
    cfg.box_hi = {3.0, 2.0, 0.0};
    cfg.regressor_kind = RegressorKind::Example1Cycle;
    cfg.seed = 1;
    cfg.trials = 500;
    cfg.horizon = 10000;
    cfg.name = "example1";
    cfg.alphas = {1.0, 8.0, 14.0, 20.0};
    cfg.beta = 0.5;
    // Outside the box in the last coordinate; the harness projects it.
    cfg.theta0 = Vec{0.5, 0.5, 0.5};
    cfg.p0_scale = 3.0;
    return cfg;
}

ExperimentConfig scalar_binary_config() {
    ExperimentConfig cfg;
    cfg.thresholds = {0.0};
    cfg.sigma = 1.0;
    cfg.theta = {0.0};
    cfg.box_lo = {-3.0};
    cfg.box_hi = {3.0};
    cfg.regressor_kind = RegressorKind::FixedSequence;
    cfg.sequence = {{1.0}};
    cfg.seed = 1;
    cfg.trials = 2000;
    cfg.horizon = 2000;
    cfg.estimators = {EstimatorKind::Ibid};
    cfg.name = "scalar_binary";
    cfg.p0_scale = 3.0;
    return cfg;
}

} // namespace qident
