#include "qident/harness.hpp"

#include "qident/crlb.hpp"
#include "qident/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#ifndef QIDENT_VERSION
#define QIDENT_VERSION "0.0.0"
#endif

namespace qident {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Setup {
    QuantizerSpec spec;
    GaussianNoise noise;
    BoxDomain box;
    TrueSystem sys;
    RegressorStream regs;
    std::vector<std::size_t> checkpoints;
    Vec theta0;
    bool theta0_projected;
    SymMatrix p0;
    std::optional<ConstantWeights> weights;
    bool run_wqnp;
    bool run_ibid;
    /// tr(Delta_k) at the checkpoints when the regressors do not depend on the trial.
    std::optional<Vec> shared_trace_crlb;
};

Setup make_setup(const ExperimentConfig& cfg) {
    validate_config(cfg);
    QuantizerSpec spec(cfg.thresholds);
    GaussianNoise noise(cfg.sigma);
    BoxDomain box(cfg.box_lo, cfg.box_hi);
    TrueSystem sys(cfg.theta, noise, spec, box);
    SymMatrix p0 = SymMatrix::identity(cfg.dim(), cfg.p0_scale);

    Vec theta0 = cfg.theta0 ? *cfg.theta0 : box.center();
    const bool projected = !box.contains(theta0);
    if (projected) theta0 = project(theta0, sym_invert(p0), box);

    std::optional<ConstantWeights> weights;
    if (cfg.runs(EstimatorKind::Wqnp)) weights.emplace(cfg.alphas, cfg.beta);

    return Setup{std::move(spec), noise, box, std::move(sys), make_regressors(cfg), resolved_checkpoints(cfg),
                 std::move(theta0), projected, std::move(p0), std::move(weights),
                 cfg.runs(EstimatorKind::Wqnp), cfg.runs(EstimatorKind::Ibid), std::nullopt};
}

Vec crlb_traces(const Setup& s, const CounterRng& reg_rng) {
    CrlbAccumulator acc(s.sys.dim(), s.spec, s.noise);
    Vec out;
    std::size_t c = 0;
    for (std::size_t k = 1; c < s.checkpoints.size(); ++k) {
        const Vec phi = s.regs.phi(k, reg_rng);
        acc.accumulate(phi, dot(phi, s.sys.theta()));
        if (k == s.checkpoints[c]) {
            out.push_back(bound(acc).trace());
            ++c;
        }
    }
    return out;
}

struct TrialOut {
    Vec sq_w, sq_i;
    std::vector<Vec> err_w, err_i;
    Vec trp_w, trp_i;
    Vec tr_delta;
    std::uint64_t steps = 0;
    std::uint64_t gain_bad = 0;
    std::uint64_t box_bad = 0;
};

Vec error_of(const Vec& theta_hat, const Vec& theta) {
    Vec e(theta.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = theta_hat[i] - theta[i];
    return e;
}

TrialOut run_trial(const Setup& s, std::uint64_t seed, std::size_t trial, std::vector<TraceRow>* trace) {
    const CounterRng reg_rng = CounterRng::derive(seed, trial, 0);
    CounterRng noise_rng = CounterRng::derive(seed, trial, 1);
    const std::size_t n = s.sys.dim();
    const Vec& theta = s.sys.theta();

    std::optional<EstimatorState> w, b;
    if (s.run_wqnp) w = EstimatorState::initial(s.theta0, s.p0, s.box);
    if (s.run_ibid) b = EstimatorState::initial(s.theta0, s.p0, s.box);
    std::optional<CrlbAccumulator> acc;
    if (!s.shared_trace_crlb) acc.emplace(n, s.spec, s.noise);

    TrialOut out;
    auto tally = [&](const StepRecord& r, const EstimatorState& st) {
        ++out.steps;
        if (!(r.gain > 0.0 && r.gain <= 1.0)) ++out.gain_bad;
        if (!s.box.contains(st.theta_hat)) ++out.box_bad;
    };

    std::size_t c = 0;
    for (std::size_t k = 1; c < s.checkpoints.size(); ++k) {
        const Vec phi = s.regs.phi(k, reg_rng);
        const Observation obs = step_system(s.sys, phi, noise_rng);
        if (w) {
            StepRecord r = wqnp_step(*w, phi, obs.level, *s.weights, s.spec, s.noise, s.box);
            tally(r, *w);
            if (trace) trace->push_back({EstimatorKind::Wqnp, std::move(r), w->theta_hat});
        }
        if (b) {
            StepRecord r = ibid_step(*b, phi, obs.level, s.spec, s.noise, s.box);
            tally(r, *b);
            if (trace) trace->push_back({EstimatorKind::Ibid, std::move(r), b->theta_hat});
        }
        if (acc) acc->accumulate(phi, dot(phi, theta));

        if (k != s.checkpoints[c]) continue;
        ++c;
        if (w) {
            out.err_w.push_back(error_of(w->theta_hat, theta));
            out.sq_w.push_back(dot(out.err_w.back(), out.err_w.back()));
            out.trp_w.push_back(w->p.trace());
        }
        if (b) {
            out.err_i.push_back(error_of(b->theta_hat, theta));
            out.sq_i.push_back(dot(out.err_i.back(), out.err_i.back()));
            out.trp_i.push_back(b->p.trace());
        }
        if (acc) out.tr_delta.push_back(bound(*acc).trace());
    }
    return out;
}

double mean_of(const std::vector<TrialOut>& trials, auto get) {
    double s = 0.0;
    for (const auto& t : trials) s += get(t);
    return s / static_cast<double>(trials.size());
}

double se_of(const std::vector<TrialOut>& trials, double mean, auto get) {
    const std::size_t T = trials.size();
    if (T < 2) return kNaN;
    double ss = 0.0;
    for (const auto& t : trials) {
        const double d = get(t) - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(T - 1) / static_cast<double>(T));
}

EstimatorSeries reduce_series(const std::vector<TrialOut>& trials, std::size_t checkpoints, std::size_t n,
                              bool ibid) {
    EstimatorSeries s;
    for (std::size_t c = 0; c < checkpoints; ++c) {
        auto sq = [&](const TrialOut& t) { return ibid ? t.sq_i[c] : t.sq_w[c]; };
        auto trp = [&](const TrialOut& t) { return ibid ? t.trp_i[c] : t.trp_w[c]; };
        const double m = mean_of(trials, sq);
        s.mse.push_back(m);
        s.mse_se.push_back(se_of(trials, m, sq));
        s.mean_trace_p.push_back(mean_of(trials, trp));
        Vec bias(n);
        for (std::size_t i = 0; i < n; ++i)
            bias[i] = mean_of(trials, [&](const TrialOut& t) { return (ibid ? t.err_i[c] : t.err_w[c])[i]; });
        s.bias.push_back(std::move(bias));
    }
    return s;
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

nlohmann::ordered_json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["system"] = {{"thresholds", cfg.thresholds},
                   {"sigma", cfg.sigma},
                   {"theta", cfg.theta},
                   {"box_lo", cfg.box_lo},
                   {"box_hi", cfg.box_hi}};
    ordered_json reg = {{"kind", to_string(cfg.regressor_kind)}, {"seed", cfg.seed}};
    if (!cfg.sequence.empty()) reg["sequence"] = cfg.sequence;
    j["regressors"] = reg;
    std::vector<std::string> est;
    for (auto e : cfg.estimators) est.push_back(to_string(e));
    j["run"] = {{"trials", cfg.trials},
                {"horizon", cfg.horizon},
                {"checkpoints", resolved_checkpoints(cfg)},
                {"estimators", est},
                {"name", cfg.name}};
    if (cfg.runs(EstimatorKind::Wqnp)) j["wqnp"] = {{"alphas", cfg.alphas}, {"beta", cfg.beta}};
    ordered_json init = {{"p0_scale", cfg.p0_scale}};
    if (cfg.theta0) init["theta0"] = *cfg.theta0;
    j["init"] = init;
    return j;
}

} // namespace

const EstimatorSeries& AggregateMetrics::series(EstimatorKind kind) const {
    const auto& s = kind == EstimatorKind::Wqnp ? wqnp : ibid;
    if (!s) throw DomainError("AggregateMetrics: estimator " + to_string(kind) + " was not run");
    return *s;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    Setup setup = make_setup(cfg);
    if (setup.regs.kind() == RegressorKind::FixedSequence)
        setup.shared_trace_crlb = crlb_traces(setup, CounterRng::derive(cfg.seed, 0, 0));

    const std::size_t T = cfg.trials;
    std::vector<std::size_t> order = opts.dispatch_order;
    if (order.empty()) {
        order.resize(T);
        std::iota(order.begin(), order.end(), std::size_t{0});
    } else {
        std::vector<std::size_t> sorted = order;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i)
            if (sorted[i] != i || sorted.size() != T)
                throw DomainError("run_experiment: dispatch_order is not a permutation of the trials");
    }
    if (opts.trace_trial && *opts.trace_trial >= T) throw DomainError("run_experiment: trace_trial out of range");

    std::vector<TrialOut> results(T);
    std::vector<std::exception_ptr> errors(T);
    std::vector<TraceRow> trace;
    std::atomic<std::size_t> next{0}, done{0};
    std::atomic<bool> failed{false};

    auto worker = [&] {
        for (;;) {
            const std::size_t slot = next.fetch_add(1);
            if (slot >= T || failed.load()) return;
            const std::size_t trial = order[slot];
            try {
                std::vector<TraceRow>* tr = opts.trace_trial == trial ? &trace : nullptr;
                results[trial] = run_trial(setup, cfg.seed, trial, tr);
            } catch (...) {
                errors[trial] = std::current_exception();
                failed.store(true);
            }
            const std::size_t d = done.fetch_add(1) + 1;
            if (opts.progress) opts.progress(d, T);
        }
    };

    std::size_t jobs = opts.jobs ? opts.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, T);
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < jobs; ++i) pool.emplace_back(worker);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    ExperimentResult res;
    AggregateMetrics& m = res.metrics;
    const std::size_t C = setup.checkpoints.size();
    const std::size_t n = cfg.dim();
    m.k = setup.checkpoints;
    m.trials = T;
    if (setup.run_wqnp) m.wqnp = reduce_series(results, C, n, false);
    if (setup.run_ibid) m.ibid = reduce_series(results, C, n, true);
    for (std::size_t c = 0; c < C; ++c) {
        if (setup.run_wqnp && setup.run_ibid) {
            auto diff = [&](const TrialOut& t) { return t.sq_w[c] - t.sq_i[c]; };
            m.mse_diff_se.push_back(se_of(results, mean_of(results, diff), diff));
        } else {
            m.mse_diff_se.push_back(kNaN);
        }
        m.trace_crlb.push_back(setup.shared_trace_crlb ? (*setup.shared_trace_crlb)[c]
                                                       : mean_of(results, [&](const TrialOut& t) { return t.tr_delta[c]; }));
    }
    const Vec e0 = error_of(setup.theta0, cfg.theta);
    m.initial_sq_error = dot(e0, e0);
    for (const auto& t : results) {
        m.steps += t.steps;
        m.gain_violations += t.gain_bad;
        m.box_violations += t.box_bad;
    }

    res.theta0 = setup.theta0;
    res.theta0_projected = setup.theta0_projected;
    if (setup.theta0_projected) {
        std::string v;
        for (double x : setup.theta0) v += (v.empty() ? "" : ", ") + fmt(x);
        res.notes.push_back("init.theta0 lies outside the box; projected to (" + v + ")");
    }
    res.trace = std::move(trace);
    return res;
}

double rate_slope(const std::vector<std::size_t>& k, const Vec& mse) {
    if (k.size() != mse.size() || k.empty()) throw DomainError("rate_slope: k and mse differ in length");
    const double cut = static_cast<double>(k.back()) / 10.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (static_cast<double>(k[i]) < cut) continue;
        if (!(mse[i] > 0.0)) throw DomainError("rate_slope: mse must be positive");
        const double x = std::log(static_cast<double>(k[i])), y = std::log(mse[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
    }
    if (count < 5) throw DomainError("rate_slope: fewer than 5 checkpoints in the last decade");
    const double N = static_cast<double>(count);
    return (N * sxy - sx * sy) / (N * sxx - sx * sx);
}

double rate_slope(const AggregateMetrics& m, EstimatorKind kind) { return rate_slope(m.k, m.series(kind).mse); }

std::vector<EfficiencyRow> efficiency_report(const AggregateMetrics& m, EstimatorKind kind) {
    const EstimatorSeries& s = m.series(kind);
    std::vector<EfficiencyRow> rows;
    for (std::size_t c = 0; c < m.k.size(); ++c)
        rows.push_back({m.k[c], s.mse[c] / m.trace_crlb[c], s.mean_trace_p[c] / m.trace_crlb[c]});
    return rows;
}

std::string metrics_csv(const AggregateMetrics& m) {
    std::string out = "k,mse_wqnp,mse_ibid,k_mse_wqnp,k_mse_ibid,k_trace_crlb,mean_trace_phat\n";
    for (std::size_t c = 0; c < m.k.size(); ++c) {
        const double k = static_cast<double>(m.k[c]);
        const double w = m.wqnp ? m.wqnp->mse[c] : kNaN;
        const double b = m.ibid ? m.ibid->mse[c] : kNaN;
        const double p = m.ibid ? m.ibid->mean_trace_p[c] : kNaN;
        out += std::to_string(m.k[c]) + "," + fmt(w) + "," + fmt(b) + "," + fmt(k * w) + "," + fmt(k * b) + "," +
               fmt(k * m.trace_crlb[c]) + "," + fmt(p) + "\n";
    }
    return out;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
    std::string out = "k,estimator,level,s,s_tilde,gain,beta,projected";
    const std::size_t n = trace.empty() ? 0 : trace.front().theta_hat.size();
    for (std::size_t i = 1; i <= n; ++i) out += ",theta_hat_" + std::to_string(i);
    out += "\n";
    for (const auto& row : trace) {
        const StepRecord& r = row.record;
        out += std::to_string(r.k) + "," + to_string(row.estimator) + "," + std::to_string(r.level) + "," +
               fmt(r.s) + "," + fmt(r.s_tilde) + "," + fmt(r.gain) + "," + fmt(r.beta) + "," +
               (r.projected ? "1" : "0");
        for (double v : row.theta_hat) out += "," + fmt(v);
        out += "\n";
    }
    return out;
}

std::string config_json(const ExperimentConfig& cfg) { return config_to_json(cfg).dump(); }

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : config_json(cfg)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string meta_json(const ExperimentConfig& cfg, const ExperimentResult& result) {
    using nlohmann::ordered_json;
    const AggregateMetrics& m = result.metrics;
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));

    ordered_json summary;
    summary["trials"] = m.trials;
    summary["horizon"] = m.k.empty() ? 0 : m.k.back();
    summary["initial_sq_error"] = m.initial_sq_error;
    summary["trace_crlb_final"] = number_or_null(m.trace_crlb.empty() ? kNaN : m.trace_crlb.back());
    for (EstimatorKind kind : {EstimatorKind::Wqnp, EstimatorKind::Ibid}) {
        if (!(kind == EstimatorKind::Wqnp ? m.wqnp : m.ibid)) continue;
        const std::string key = to_string(kind);
        const EstimatorSeries& s = m.series(kind);
        ordered_json e;
        e["mse_final"] = number_or_null(s.mse.back());
        e["mse_se_final"] = number_or_null(s.mse_se.back());
        try {
            e["rate_slope"] = rate_slope(m, kind);
        } catch (const DomainError&) {
            e["rate_slope"] = nullptr;
        }
        const auto eff = efficiency_report(m, kind);
        e["r1_final"] = number_or_null(eff.back().r1);
        e["r2_final"] = number_or_null(eff.back().r2);
        e["bias_final"] = s.bias.back();
        summary[key] = e;
    }
    summary["steps"] = m.steps;
    summary["gain_violations"] = m.gain_violations;
    summary["box_violations"] = m.box_violations;

    ordered_json j;
    j["version"] = version_string();
    j["seed"] = cfg.seed;
    j["config_hash"] = hash;
    j["config"] = config_to_json(cfg);
    j["theta0_used"] = result.theta0;
    j["theta0_projected"] = result.theta0_projected;
    j["notes"] = result.notes;
    j["summary"] = summary;
    return j.dump(2) + "\n";
}

OutputFiles write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result,
                          const std::filesystem::path& outdir) {
    std::error_code ec;
    std::filesystem::create_directories(outdir, ec);
    if (ec) throw std::runtime_error("cannot create '" + outdir.string() + "': " + ec.message());

    auto put = [](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        out << text;
        out.close();
        if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    };
    OutputFiles files{outdir / (cfg.name + "_metrics.csv"), outdir / (cfg.name + "_meta.json"), std::nullopt};
    put(files.metrics, metrics_csv(result.metrics));
    put(files.meta, meta_json(cfg, result));
    if (!result.trace.empty()) {
        files.trace = outdir / (cfg.name + "_trace.csv");
        put(*files.trace, trace_csv(result.trace));
    }
    return files;
}

std::string version_string() { return QIDENT_VERSION; }

} // namespace qident
