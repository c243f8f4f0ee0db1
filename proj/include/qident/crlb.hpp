#pragma once

#include "qident/model.hpp"
#include "qident/numerics.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace qident {

/// Fisher information carried by one quantized observation with output mean x:
/// sum_i h_i(x)^2 / H_i(x). Always in (0, 1/sigma^2].
double rho(double x, const QuantizerSpec& spec, const GaussianNoise& noise);

struct CrlbStep {
    Vec phi;
    double rho;
};

/// Running Fisher information sum_l rho_l phi_l phi_l^T for the true parameter.
class CrlbAccumulator {
public:
    CrlbAccumulator(std::size_t n, QuantizerSpec spec, GaussianNoise noise, bool keep_history = false);

    /// x_true must be phi^T theta for the true theta.
    void accumulate(std::span<const double> phi, double x_true);
    /// Adds a precomputed information weight.
    void add(std::span<const double> phi, double rho_value);

    const SymMatrix& info() const noexcept { return info_; }
    std::size_t k() const noexcept { return k_; }
    const std::vector<CrlbStep>& history() const noexcept { return history_; }
    const QuantizerSpec& spec() const noexcept { return spec_; }
    const GaussianNoise& noise() const noexcept { return noise_; }

private:
    SymMatrix info_;
    std::size_t k_ = 0;
    QuantizerSpec spec_;
    GaussianNoise noise_;
    bool keep_history_;
    std::vector<CrlbStep> history_;
};

/// Delta_k = info^{-1}. Throws NumericError when the regressors have not yet
/// excited every direction.
SymMatrix bound(const CrlbAccumulator& acc);

/// Runs the rank-one recursion
///   Delta_k = Delta_{k-1} - rho_k Delta_{k-1} phi phi^T Delta_{k-1} / (1 + rho_k phi^T Delta_{k-1} phi)
/// over `history` and returns the largest elementwise gap to the directly
/// inverted information matrix. With `delta0`, the recursion starts from that
/// prior (information delta0^{-1}); otherwise it starts at the first step where
/// the accumulated information is positive definite.
double bound_recursive_check(std::span<const CrlbStep> history,
                             const std::optional<SymMatrix>& delta0 = std::nullopt);

} // namespace qident
