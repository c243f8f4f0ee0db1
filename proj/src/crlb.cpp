#include "qident/crlb.hpp"

#include "qident/errors.hpp"

#include <algorithm>
#include <cmath>

namespace qident {

double rho(double x, const QuantizerSpec& spec, const GaussianNoise& noise) {
    if (!std::isfinite(x)) throw DomainError("rho: x must be finite");
    // h_i^2 / H_i = H_i * (h_i / H_i)^2, with h_i / H_i a truncated mean.
    const double sigma = noise.sigma();
    const CellProbs cp = cell_probs(x, spec, noise);
    double total = 0.0;
    for (std::size_t i = 0; i < spec.level_count(); ++i) {
        const double m = truncated_normal_mean((spec.lower_edge(i) - x) / sigma,
                                               (spec.upper_edge(i) - x) / sigma);
        total += cp.H[i] * m * m;
    }
    return total / (sigma * sigma);
}

CrlbAccumulator::CrlbAccumulator(std::size_t n, QuantizerSpec spec, GaussianNoise noise,
                                 bool keep_history)
    : info_(n), spec_(std::move(spec)), noise_(noise), keep_history_(keep_history) {}

void CrlbAccumulator::accumulate(std::span<const double> phi, double x_true) {
    add(phi, rho(x_true, spec_, noise_));
}

void CrlbAccumulator::add(std::span<const double> phi, double rho_value) {
    if (phi.size() != info_.order()) throw DomainError("CrlbAccumulator: dimension mismatch");
    info_.add_outer(rho_value, phi);
    ++k_;
    if (keep_history_) history_.push_back({Vec(phi.begin(), phi.end()), rho_value});
}

SymMatrix bound(const CrlbAccumulator& acc) { return sym_invert(acc.info()); }

namespace {

void sherman_morrison_step(SymMatrix& delta, std::span<const double> phi, double r) {
    const Vec g = delta.multiply(phi);
    const double denom = 1.0 + r * dot(phi, g);
    delta.add_outer(-r / denom, g);
}

double max_gap(const SymMatrix& a, const SymMatrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        worst = std::max(worst, std::fabs(a.data()[i] - b.data()[i]));
    return worst;
}

// tr(A) tr(A^{-1}) bounds the condition number from above; a rank-deficient sum
// can survive Cholesky on rounding noise, so require it to be moderate.
std::optional<SymMatrix> well_conditioned_inverse(const SymMatrix& m) {
    try {
        SymMatrix inv = sym_invert(m);
        if (m.trace() * inv.trace() < 1e8) return inv;
    } catch (const NumericError&) {
    }
    return std::nullopt;
}

} // namespace

double bound_recursive_check(std::span<const CrlbStep> history, const std::optional<SymMatrix>& delta0) {
    if (history.empty()) return 0.0;
    const std::size_t n = history.front().phi.size();

    SymMatrix info(n);
    std::size_t start = 0;
    std::optional<SymMatrix> delta;
    if (delta0) {
        if (delta0->order() != n) throw DomainError("bound_recursive_check: prior order mismatch");
        info = sym_invert(*delta0);
        delta = *delta0;
    } else {
        // Seed the recursion with the first positive definite partial sum.
        for (; start < history.size(); ++start) {
            info.add_outer(history[start].rho, history[start].phi);
            delta = well_conditioned_inverse(info);
            if (delta) {
                ++start;
                break;
            }
        }
        if (!delta) return 0.0;
    }

    double worst = 0.0;
    for (std::size_t k = start; k < history.size(); ++k) {
        const auto& step = history[k];
        if (step.phi.size() != n) throw DomainError("bound_recursive_check: dimension mismatch");
        sherman_morrison_step(*delta, step.phi, step.rho);
        info.add_outer(step.rho, step.phi);
        worst = std::max(worst, max_gap(*delta, sym_invert(info)));
    }
    return worst;
}

} // namespace qident
