#pragma once

#include "qident/estimator.hpp"
#include "qident/model.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qident {

/// Everything needed to reproduce one Monte-Carlo experiment. Field names follow
/// the config file sections (system, regressors, run, wqnp, init).
struct ExperimentConfig {
    // system
    std::vector<double> thresholds;
    double sigma = 1.0;
    Vec theta;
    Vec box_lo;
    Vec box_hi;

    // regressors
    RegressorKind regressor_kind = RegressorKind::Example1Cycle;
    std::vector<Vec> sequence; ///< rows for fixed-sequence
    std::uint64_t seed = 1;    ///< master seed

    // run
    std::size_t trials = 500;
    std::size_t horizon = 10000;
    std::vector<std::size_t> checkpoints; ///< empty: default_checkpoints(horizon, n)
    std::vector<EstimatorKind> estimators{EstimatorKind::Wqnp, EstimatorKind::Ibid};
    std::string name = "run";
    std::string outdir; ///< empty: decided by the caller

    // wqnp
    Vec alphas;
    double beta = 0.0;

    // init
    std::optional<Vec> theta0; ///< default: box center
    double p0_scale = 3.0;     ///< P_0 = p0_scale * I

    std::size_t dim() const noexcept { return theta.size(); }
    bool runs(EstimatorKind kind) const;
};

/// Parses the YAML form. Unknown keys and type mismatches raise ConfigError
/// naming the field ("system.sigma", "run.checkpoints[3]", ...). `base_dir`
/// resolves a relative regressors.file.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Structural checks across fields; throws ConfigError on the first failure.
void validate_config(const ExperimentConfig& cfg);

/// 40 log-spaced checkpoints from max(10, n) to k_max, rounded, deduplicated,
/// ending at k_max.
std::vector<std::size_t> default_checkpoints(std::size_t k_max, std::size_t n);
std::vector<std::size_t> resolved_checkpoints(const ExperimentConfig& cfg);

/// Regressor stream described by the config.
RegressorStream make_regressors(const ExperimentConfig& cfg);

/// Third-order example: theta = (-0.5, 1, -1), C = (-1, 0, 0.5), sigma = 1.5,
/// weights (1, 8, 14, 20; 0.5), P_0 = 3I, 500 trials, horizon 1e4.
ExperimentConfig example1_config();

/// phi = 1, theta = 0, C = (0), sigma = 1, box [-3, 3]; IBID only.
ExperimentConfig scalar_binary_config();

} // namespace qident
