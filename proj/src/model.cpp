#include "qident/model.hpp"

#include "qident/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace qident {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double std_density(double z) { return std::isinf(z) ? 0.0 : kInvSqrt2Pi * std::exp(-0.5 * z * z); }

// P(a < Z <= b), Z ~ N(0, 1), using whichever tail keeps the subtraction benign.
double std_mass(double a, double b) {
    if (a >= 0.0) return 0.5 * (erfc_rational(a * kInvSqrt2) - erfc_rational(b * kInvSqrt2));
    if (b <= 0.0) return 0.5 * (erfc_rational(-b * kInvSqrt2) - erfc_rational(-a * kInvSqrt2));
    return 0.5 * (erf_rational(b * kInvSqrt2) - erf_rational(a * kInvSqrt2));
}

} // namespace

QuantizerSpec::QuantizerSpec(std::vector<double> thresholds) : c_(std::move(thresholds)) {
    if (c_.empty()) throw DomainError("QuantizerSpec: at least one threshold is required");
    for (double c : c_)
        if (!std::isfinite(c)) throw DomainError("QuantizerSpec: thresholds must be finite");
    for (std::size_t i = 1; i < c_.size(); ++i)
        if (!(c_[i - 1] < c_[i]))
            throw DomainError("QuantizerSpec: thresholds must be strictly increasing");
}

double QuantizerSpec::lower_edge(std::size_t level) const noexcept {
    return level == 0 ? -kInf : c_[level - 1];
}

double QuantizerSpec::upper_edge(std::size_t level) const noexcept {
    return level >= c_.size() ? kInf : c_[level];
}

GaussianNoise::GaussianNoise(double sigma) : sigma_(sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw DomainError("GaussianNoise: sigma must be finite and positive");
}

BoxDomain::BoxDomain(Vec lo, Vec hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.empty() || lo_.size() != hi_.size())
        throw DomainError("BoxDomain: bounds must be non-empty and of equal length");
    if (lo_.size() > kMaxOrder) throw DomainError("BoxDomain: dimension exceeds kMaxOrder");
    for (std::size_t i = 0; i < lo_.size(); ++i) {
        if (!std::isfinite(lo_[i]) || !std::isfinite(hi_[i]))
            throw DomainError("BoxDomain: bounds must be finite");
        if (lo_[i] > hi_[i]) throw DomainError("BoxDomain: lo > hi in coordinate " + std::to_string(i));
    }
}

bool BoxDomain::contains(std::span<const double> x) const {
    if (x.size() != dim()) throw DomainError("BoxDomain::contains: dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!(x[i] >= lo_[i] && x[i] <= hi_[i])) return false;
    return true;
}

Vec BoxDomain::center() const {
    Vec c(dim());
    for (std::size_t i = 0; i < dim(); ++i) c[i] = 0.5 * (lo_[i] + hi_[i]);
    return c;
}

double BoxDomain::radius() const noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) {
        const double m = std::max(std::fabs(lo_[i]), std::fabs(hi_[i]));
        s += m * m;
    }
    return std::sqrt(s);
}

TrueSystem::TrueSystem(Vec theta, GaussianNoise noise, QuantizerSpec quantizer, const BoxDomain& box)
    : theta_(std::move(theta)), noise_(noise), quantizer_(std::move(quantizer)) {
    if (theta_.size() != box.dim()) throw DomainError("TrueSystem: theta and box dimensions differ");
    if (!box.contains(theta_)) throw DomainError("TrueSystem: theta lies outside the parameter box");
}

std::size_t quantize(double y, const QuantizerSpec& q) {
    const auto& c = q.thresholds();
    // First threshold >= y; y == C_i stays in the cell below C_i.
    return static_cast<std::size_t>(std::lower_bound(c.begin(), c.end(), y) - c.begin());
}

Observation step_system(const TrueSystem& sys, std::span<const double> phi, CounterRng& rng) {
    if (phi.size() != sys.dim()) throw DomainError("step_system: regressor dimension mismatch");
    const double y = dot(phi, sys.theta()) + sys.noise().sigma() * rng.normal();
    return {quantize(y, sys.quantizer()), y};
}

CellProbs cell_probs(double x, const QuantizerSpec& q, const GaussianNoise& noise) {
    if (!std::isfinite(x)) throw DomainError("cell_probs: x must be finite");
    const double sigma = noise.sigma();
    const std::size_t levels = q.level_count();
    CellProbs out{Vec(levels), Vec(levels)};
    for (std::size_t i = 0; i < levels; ++i) {
        const double a = (q.lower_edge(i) - x) / sigma;
        const double b = (q.upper_edge(i) - x) / sigma;
        out.H[i] = std_mass(a, b);
        out.h[i] = (std_density(b) - std_density(a)) / sigma;
    }
    return out;
}

// ---------------------------------------------------------------------------

double example1_input(std::size_t j, double perturbation) {
    static constexpr std::array<double, 3> kBase{-2.0, 0.0, 0.5};
    return kBase[j % 3] + perturbation;
}

double example1_input(std::size_t j, const CounterRng& rng) {
    return example1_input(j, 0.1 * rng.uniform_at(j));
}

Vec example1_regressors(std::size_t k, const CounterRng& rng) {
    if (k == 0) throw DomainError("example1_regressors: k must be >= 1");
    return {1.0, example1_input(k, rng), example1_input(k - 1, rng)};
}

double example1_phi_bound() { return std::sqrt(1.0 + 2.0 * 2.1 * 2.1); }

std::string to_string(RegressorKind kind) {
    switch (kind) {
    case RegressorKind::Example1Cycle: return "example1-cycle";
    case RegressorKind::FixedSequence: return "fixed-sequence";
    case RegressorKind::UserSupplied: return "user-supplied";
    }
    return "unknown";
}

RegressorKind regressor_kind_from_string(const std::string& name) {
    if (name == "example1-cycle" || name == "example1") return RegressorKind::Example1Cycle;
    if (name == "fixed-sequence") return RegressorKind::FixedSequence;
    if (name == "user-supplied") return RegressorKind::UserSupplied;
    throw DomainError("unknown regressor kind '" + name + "'");
}

RegressorStream RegressorStream::example1() {
    return RegressorStream(RegressorKind::Example1Cycle, 3, example1_phi_bound());
}

RegressorStream RegressorStream::fixed_sequence(std::vector<Vec> rows) {
    if (rows.empty()) throw DomainError("fixed_sequence: no rows");
    const std::size_t n = rows.front().size();
    if (n == 0 || n > kMaxOrder) throw DomainError("fixed_sequence: bad regressor dimension");
    double bound = 0.0;
    for (const auto& r : rows) {
        if (r.size() != n) throw DomainError("fixed_sequence: rows differ in length");
        for (double v : r)
            if (!std::isfinite(v)) throw DomainError("fixed_sequence: non-finite entry");
        bound = std::max(bound, std::sqrt(dot(r, r)));
    }
    RegressorStream s(RegressorKind::FixedSequence, n, bound);
    s.rows_ = std::move(rows);
    return s;
}

RegressorStream RegressorStream::user_supplied(std::size_t dim, double bound, Generator gen) {
    if (dim == 0 || dim > kMaxOrder) throw DomainError("user_supplied: bad regressor dimension");
    if (!(bound > 0.0) || !std::isfinite(bound)) throw DomainError("user_supplied: bad bound");
    if (!gen) throw DomainError("user_supplied: empty generator");
    RegressorStream s(RegressorKind::UserSupplied, dim, bound);
    s.gen_ = std::move(gen);
    return s;
}

Vec RegressorStream::phi(std::size_t k, const CounterRng& rng) const {
    if (k == 0) throw DomainError("RegressorStream::phi: k must be >= 1");
    switch (kind_) {
    case RegressorKind::Example1Cycle: return example1_regressors(k, rng);
    case RegressorKind::FixedSequence: return rows_[(k - 1) % rows_.size()];
    case RegressorKind::UserSupplied: break;
    }
    Vec v = gen_(k, rng);
    if (v.size() != dim_) throw DomainError("user-supplied regressor has wrong dimension");
    if (std::sqrt(dot(v, v)) > bound_)
        throw DomainError("user-supplied regressor exceeds its declared bound at k=" + std::to_string(k));
    return v;
}

} // namespace qident
