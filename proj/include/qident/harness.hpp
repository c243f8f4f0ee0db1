#pragma once

#include "qident/config.hpp"
#include "qident/estimator.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace qident {

/// Per-estimator aggregates, one entry per checkpoint.
struct EstimatorSeries {
    Vec mse;                ///< mean over trials of |theta_hat_k - theta|^2
    Vec mse_se;             ///< standard error of that mean
    Vec mean_trace_p;       ///< mean over trials of tr(P_k)
    std::vector<Vec> bias;  ///< mean of theta_hat_k - theta, per coordinate
};

struct AggregateMetrics {
    std::vector<std::size_t> k;
    std::size_t trials = 0;
    std::optional<EstimatorSeries> wqnp;
    std::optional<EstimatorSeries> ibid;
    /// Standard error of mean(sq_err_wqnp - sq_err_ibid); both estimators see the
    /// same regressors and noise in a trial, so the difference is paired.
    Vec mse_diff_se;
    Vec trace_crlb;            ///< mean over trials of tr(Delta_k)
    double initial_sq_error = 0.0; ///< |theta_0 - theta|^2 (identical in every trial)

    // Invariant tallies over every step of every trial.
    std::uint64_t steps = 0;
    std::uint64_t gain_violations = 0; ///< a_k outside (0, 1]
    std::uint64_t box_violations = 0;  ///< theta_hat_k outside the box

    const EstimatorSeries& series(EstimatorKind kind) const;
};

/// One step of one estimator in the traced trial.
struct TraceRow {
    EstimatorKind estimator;
    StepRecord record;
    Vec theta_hat;
};

struct ExperimentResult {
    AggregateMetrics metrics;
    Vec theta0;                 ///< starting estimate actually used
    bool theta0_projected = false;
    std::vector<TraceRow> trace;
    std::vector<std::string> notes;
};

struct RunOptions {
    std::size_t jobs = 0; ///< worker cap; 0 picks the hardware concurrency
    std::optional<std::size_t> trace_trial;
    /// Order in which trials are handed to workers (a permutation of
    /// 0..trials-1). Test hook; results do not depend on it.
    std::vector<std::size_t> dispatch_order;
    /// Called after each finished trial, from worker threads.
    std::function<void(std::size_t done, std::size_t total)> progress;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// OLS slope of log(mse) on log(k) over the checkpoints with k >= k.back() / 10.
/// Throws DomainError with fewer than 5 such points.
double rate_slope(const std::vector<std::size_t>& k, const Vec& mse);
double rate_slope(const AggregateMetrics& m, EstimatorKind kind);

struct EfficiencyRow {
    std::size_t k;
    double r1; ///< mse / tr(Delta)
    double r2; ///< mean tr(P) / tr(Delta)
};

std::vector<EfficiencyRow> efficiency_report(const AggregateMetrics& m,
                                             EstimatorKind kind = EstimatorKind::Ibid);

/// Columns: k, mse_wqnp, mse_ibid, k_mse_wqnp, k_mse_ibid, k_trace_crlb,
/// mean_trace_phat. Missing estimators print as nan.
std::string metrics_csv(const AggregateMetrics& m);
std::string trace_csv(const std::vector<TraceRow>& trace);

/// Canonical JSON of the config, and its FNV-1a hash.
std::string config_json(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::string meta_json(const ExperimentConfig& cfg, const ExperimentResult& result);

struct OutputFiles {
    std::filesystem::path metrics;
    std::filesystem::path meta;
    std::optional<std::filesystem::path> trace;
};

/// Writes <name>_metrics.csv, <name>_meta.json and, when the result carries a
/// trace, <name>_trace.csv into `outdir` (created if needed).
OutputFiles write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result,
                          const std::filesystem::path& outdir);

std::string version_string();

} // namespace qident
