#pragma once

#include "qident/model.hpp"
#include "qident/numerics.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace qident {

enum class EstimatorKind { Wqnp, Ibid };

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);

/// Constant WQNP weights: alphas for cells 1..m+1 (0-based here) and the gain weight beta.
/// Only finiteness and beta > 0 are enforced; ordering and the convergence
/// condition are checked separately by validate_wqnp_weights.
struct ConstantWeights {
    Vec alphas;
    double beta;

    ConstantWeights(Vec alphas, double beta);
};

struct EstimatorState {
    Vec theta_hat;
    SymMatrix p;
    /// P^{-1} accumulated as P_0^{-1} + sum beta phi phi^T. Used as the
    /// projection metric, and checked against P in tests.
    SymMatrix p_inv;
    std::size_t k = 0;

    /// theta0 must lie in the box; p0 must be positive definite.
    static EstimatorState initial(Vec theta0, SymMatrix p0, const BoxDomain& box);
};

struct StepRecord {
    std::size_t k;
    std::size_t level;
    double s;
    double s_tilde;
    double gain;
    Vec alphas;
    double beta;
    bool projected; ///< the unconstrained candidate left the box
};

struct StepOptions {
    /// Test hook: false skips the projection entirely.
    bool project = true;
};

/// Weight of the observed cell: alphas[q].
double convert(std::size_t q, std::span<const double> alphas);

/// s - sum_i alpha_i H_hat_i
double innovation(std::size_t q, std::span<const double> alphas, std::span<const double> H_hat);

/// argmin over the box of (z - x)^T Q (z - x), Q positive definite.
/// Exact primal active-set solve.
Vec project(std::span<const double> x, const SymMatrix& q, const BoxDomain& box);

StepRecord wqnp_step(EstimatorState& state, std::span<const double> phi, std::size_t q,
                     const ConstantWeights& weights, const QuantizerSpec& spec,
                     const GaussianNoise& noise, const BoxDomain& box, const StepOptions& opts = {});

struct IbidWeights {
    Vec alphas; ///< -h_i / H_i, strictly increasing
    double beta; ///< sum h_i^2 / H_i
};

IbidWeights ibid_weights(double x_hat, const QuantizerSpec& spec, const GaussianNoise& noise);

StepRecord ibid_step(EstimatorState& state, std::span<const double> phi, std::size_t q,
                     const QuantizerSpec& spec, const GaussianNoise& noise, const BoxDomain& box,
                     const StepOptions& opts = {});

struct WqnpValidation {
    bool ordering_ok;   ///< alpha_1 < ... < alpha_{m+1}
    bool gap_ok;        ///< alpha_{m+1} - alpha_1 > 0
    bool beta_ok;       ///< beta > 0
    double alpha_gap;
    double f_min;       ///< min of the noise density over [C_i -/+ phi_bar theta_bar]
    double lhs;         ///< (2 alpha_gap / beta) f_min
    double rhs;         ///< 1 - 1/n
    bool condition_ok;  ///< lhs > rhs

    /// Hard violations (ordering, gap, beta); the density condition is advisory.
    std::vector<std::string> violations() const;
    std::vector<std::string> warnings() const;
};

WqnpValidation validate_wqnp_weights(const ConstantWeights& weights, const BoxDomain& box,
                                     double phi_bar, const QuantizerSpec& spec,
                                     const GaussianNoise& noise, std::size_t n);

} // namespace qident
