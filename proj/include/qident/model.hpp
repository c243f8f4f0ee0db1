#pragma once

#include "qident/numerics.hpp"
#include "qident/rng.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace qident {

/// Thresholds C_1 < ... < C_m of an (m+1)-level sensor. C_0 = -inf and
/// C_{m+1} = +inf are implicit.
class QuantizerSpec {
public:
    explicit QuantizerSpec(std::vector<double> thresholds);

    const std::vector<double>& thresholds() const noexcept { return c_; }
    std::size_t threshold_count() const noexcept { return c_.size(); }
    std::size_t level_count() const noexcept { return c_.size() + 1; }
    /// Lower edge of cell `level` (level in 0..m); -inf for level 0.
    double lower_edge(std::size_t level) const noexcept;
    /// Upper edge of cell `level`; +inf for level m.
    double upper_edge(std::size_t level) const noexcept;

private:
    std::vector<double> c_;
};

/// Zero-mean Gaussian output noise.
class GaussianNoise {
public:
    explicit GaussianNoise(double sigma);
    double sigma() const noexcept { return sigma_; }

private:
    double sigma_;
};

/// Axis-aligned parameter box [lo_i, hi_i].
class BoxDomain {
public:
    BoxDomain(Vec lo, Vec hi);

    std::size_t dim() const noexcept { return lo_.size(); }
    const Vec& lo() const noexcept { return lo_; }
    const Vec& hi() const noexcept { return hi_; }
    bool contains(std::span<const double> x) const;
    Vec center() const;
    /// sup over the box of the Euclidean norm (attained at a corner).
    double radius() const noexcept;

private:
    Vec lo_;
    Vec hi_;
};

/// Ground truth: y = phi^T theta + d, d ~ N(0, sigma^2), observed through the quantizer.
class TrueSystem {
public:
    TrueSystem(Vec theta, GaussianNoise noise, QuantizerSpec quantizer, const BoxDomain& box);

    const Vec& theta() const noexcept { return theta_; }
    const GaussianNoise& noise() const noexcept { return noise_; }
    const QuantizerSpec& quantizer() const noexcept { return quantizer_; }
    std::size_t dim() const noexcept { return theta_.size(); }

private:
    Vec theta_;
    GaussianNoise noise_;
    QuantizerSpec quantizer_;
};

/// Level i with C_i < y <= C_{i+1}; y exactly on C_i goes to the lower cell.
std::size_t quantize(double y, const QuantizerSpec& q);

struct Observation {
    std::size_t level;
    double y_hidden; ///< for test oracles only
};

Observation step_system(const TrueSystem& sys, std::span<const double> phi, CounterRng& rng);

/// Cell probabilities H_i(x) and their sensitivities h_i(x), i = 1..m+1
/// (stored 0-based), for the output mean x.
struct CellProbs {
    Vec H;
    Vec h;
};

CellProbs cell_probs(double x, const QuantizerSpec& q, const GaussianNoise& noise);

// ---------------------------------------------------------------------------
// Regressors
// ---------------------------------------------------------------------------

/// Input u_j of the three-phase excitation (-2, 0, 0.5) plus a perturbation e_j.
double example1_input(std::size_t j, double perturbation);
/// Same, with e_j ~ Uniform[0, 0.1) drawn at counter j of `rng`.
double example1_input(std::size_t j, const CounterRng& rng);

/// phi_k = [1, u_k, u_{k-1}], k >= 1.
Vec example1_regressors(std::size_t k, const CounterRng& rng);

/// Upper bound on ||phi_k|| for the example-1 stream.
double example1_phi_bound();

enum class RegressorKind { Example1Cycle, FixedSequence, UserSupplied };

std::string to_string(RegressorKind kind);
RegressorKind regressor_kind_from_string(const std::string& name);

/// Source of phi_k, k = 1, 2, ... Deterministic given the per-trial stream.
class RegressorStream {
public:
    using Generator = std::function<Vec(std::size_t k, const CounterRng& rng)>;

    static RegressorStream example1();
    /// Cycles through `rows` (phi_1 = rows[0], ...).
    static RegressorStream fixed_sequence(std::vector<Vec> rows);
    /// `bound` is the declared phi-bar; every emitted phi is checked against it.
    static RegressorStream user_supplied(std::size_t dim, double bound, Generator gen);

    RegressorKind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return dim_; }
    double bound() const noexcept { return bound_; }
    const std::vector<Vec>& rows() const noexcept { return rows_; }

    Vec phi(std::size_t k, const CounterRng& rng) const;

private:
    RegressorStream(RegressorKind kind, std::size_t dim, double bound)
        : kind_(kind), dim_(dim), bound_(bound) {}

    RegressorKind kind_;
    std::size_t dim_;
    double bound_;
    std::vector<Vec> rows_;
    Generator gen_;
};

} // namespace qident
