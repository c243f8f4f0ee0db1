#include "qident/estimator.hpp"

#include "qident/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qident {

std::string to_string(EstimatorKind kind) { return kind == EstimatorKind::Wqnp ? "wqnp" : "ibid"; }

EstimatorKind estimator_kind_from_string(const std::string& name) {
    if (name == "wqnp") return EstimatorKind::Wqnp;
    if (name == "ibid") return EstimatorKind::Ibid;
    throw DomainError("unknown estimator '" + name + "' (expected wqnp or ibid)");
}

ConstantWeights::ConstantWeights(Vec a, double b) : alphas(std::move(a)), beta(b) {
    if (alphas.size() < 2) throw DomainError("ConstantWeights: need at least two alphas");
    for (double x : alphas)
        if (!std::isfinite(x)) throw DomainError("ConstantWeights: alphas must be finite");
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw DomainError("ConstantWeights: beta must be finite and positive");
}

EstimatorState EstimatorState::initial(Vec theta0, SymMatrix p0, const BoxDomain& box) {
    if (theta0.size() != box.dim() || p0.order() != box.dim())
        throw DomainError("EstimatorState: theta0, P0 and box dimensions differ");
    if (!box.contains(theta0)) throw DomainError("EstimatorState: theta0 lies outside the box");
    SymMatrix p_inv = sym_invert(p0);
    return EstimatorState{std::move(theta0), std::move(p0), std::move(p_inv), 0};
}

double convert(std::size_t q, std::span<const double> alphas) {
    if (q >= alphas.size())
        throw DomainError("convert: level " + std::to_string(q) + " out of range for " +
                          std::to_string(alphas.size()) + " cells");
    return alphas[q];
}

double innovation(std::size_t q, std::span<const double> alphas, std::span<const double> H_hat) {
    if (alphas.size() != H_hat.size())
        throw DomainError("innovation: alphas and H_hat differ in length");
    return convert(q, alphas) - dot(alphas, H_hat);
}

namespace {

StepRecord finish_step(EstimatorState& st, std::span<const double> phi, std::size_t q, double s,
                       double s_tilde, double beta, Vec alphas, const BoxDomain& box,
                       const StepOptions& opts) {
    // Gain uses P_{k-1}; the projection metric is the updated P_k^{-1}.
    const Vec g = st.p.multiply(phi);
    // An IBID beta can underflow to zero far from every threshold; the update then
    // degenerates continuously to a = 1 with P unchanged.
    Downdate dd = beta == 0.0 ? Downdate{st.p, 1.0} : rank_one_downdate(st.p, phi, beta);

    Vec candidate = st.theta_hat;
    for (std::size_t i = 0; i < candidate.size(); ++i) candidate[i] += dd.gain * g[i] * s_tilde;

    st.p = std::move(dd.p);
    st.p_inv.add_outer(beta, phi);
    ++st.k;

    const bool outside = !box.contains(candidate);
    st.theta_hat = (opts.project && outside) ? project(candidate, st.p_inv, box) : std::move(candidate);

    return StepRecord{st.k, q, s, s_tilde, dd.gain, std::move(alphas), beta, outside};
}

void check_step_dims(const EstimatorState& st, std::span<const double> phi, const BoxDomain& box) {
    if (phi.size() != st.theta_hat.size() || box.dim() != st.theta_hat.size())
        throw DomainError("estimator step: dimension mismatch");
}

} // namespace

StepRecord wqnp_step(EstimatorState& state, std::span<const double> phi, std::size_t q,
                     const ConstantWeights& weights, const QuantizerSpec& spec,
                     const GaussianNoise& noise, const BoxDomain& box, const StepOptions& opts) {
    check_step_dims(state, phi, box);
    if (weights.alphas.size() != spec.level_count())
        throw DomainError("wqnp_step: need one alpha per sensor cell");
    const CellProbs cp = cell_probs(dot(phi, state.theta_hat), spec, noise);
    const double s = convert(q, weights.alphas);
    const double s_tilde = innovation(q, weights.alphas, cp.H);
    return finish_step(state, phi, q, s, s_tilde, weights.beta, weights.alphas, box, opts);
}

IbidWeights ibid_weights(double x_hat, const QuantizerSpec& spec, const GaussianNoise& noise) {
    if (!std::isfinite(x_hat)) throw DomainError("ibid_weights: x_hat must be finite");
    const double sigma = noise.sigma();
    const std::size_t levels = spec.level_count();
    const CellProbs cp = cell_probs(x_hat, spec, noise);

    // -h_i/H_i is the mean of the noise truncated to cell i, divided by sigma^2;
    // evaluating it as a truncated mean avoids dividing two underflowing tails.
    IbidWeights w{Vec(levels), 0.0};
    for (std::size_t i = 0; i < levels; ++i) {
        const double a = (spec.lower_edge(i) - x_hat) / sigma;
        const double b = (spec.upper_edge(i) - x_hat) / sigma;
        w.alphas[i] = truncated_normal_mean(a, b) / sigma;
        w.beta += w.alphas[i] * w.alphas[i] * cp.H[i];
    }
    return w;
}

StepRecord ibid_step(EstimatorState& state, std::span<const double> phi, std::size_t q,
                     const QuantizerSpec& spec, const GaussianNoise& noise, const BoxDomain& box,
                     const StepOptions& opts) {
    check_step_dims(state, phi, box);
    IbidWeights w = ibid_weights(dot(phi, state.theta_hat), spec, noise);
    // sum_i alpha_i H_i = -sum_i h_i = 0, so the innovation is the converted value itself.
    const double s = convert(q, w.alphas);
    return finish_step(state, phi, q, s, s, w.beta, std::move(w.alphas), box, opts);
}

// ---------------------------------------------------------------------------

std::vector<std::string> WqnpValidation::violations() const {
    std::vector<std::string> v;
    if (!ordering_ok) v.emplace_back("alphas are not strictly increasing");
    if (!gap_ok) v.emplace_back("alpha gap (alpha_{m+1} - alpha_1) is not positive");
    if (!beta_ok) v.emplace_back("beta is not positive");
    return v;
}

std::vector<std::string> WqnpValidation::warnings() const {
    std::vector<std::string> v;
    if (!condition_ok) {
        std::ostringstream os;
        os << "sufficient convergence condition (2*gap/beta)*f_min > 1 - 1/n fails: " << lhs
           << " <= " << rhs;
        v.push_back(os.str());
    }
    return v;
}

WqnpValidation validate_wqnp_weights(const ConstantWeights& weights, const BoxDomain& box,
                                     double phi_bar, const QuantizerSpec& spec,
                                     const GaussianNoise& noise, std::size_t n) {
    if (n == 0) throw DomainError("validate_wqnp_weights: n must be positive");
    WqnpValidation r{};
    const auto& a = weights.alphas;
    r.ordering_ok = a.size() == spec.level_count();
    for (std::size_t i = 1; i < a.size(); ++i) r.ordering_ok = r.ordering_ok && a[i - 1] < a[i];
    r.alpha_gap = a.back() - a.front();
    r.gap_ok = r.alpha_gap > 0.0;
    r.beta_ok = weights.beta > 0.0;

    // The Gaussian density is smallest at the interval end farthest from zero.
    const double reach = phi_bar * box.radius();
    double far = 0.0;
    for (double c : spec.thresholds()) far = std::max(far, std::fabs(c) + reach);
    r.f_min = gauss_pdf(far, noise.sigma());
    r.lhs = 2.0 * r.alpha_gap / weights.beta * r.f_min;
    r.rhs = 1.0 - 1.0 / static_cast<double>(n);
    r.condition_ok = r.lhs > r.rhs;
    return r;
}

} // namespace qident
