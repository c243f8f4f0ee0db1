#include "qident/cli.hpp"

#include "qident/config.hpp"
#include "qident/crlb.hpp"
#include "qident/errors.hpp"
#include "qident/harness.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>

namespace qident {
namespace {

/// Flags shared by the commands that run trials. Unset flags leave the config alone.
struct RunFlags {
    std::optional<std::size_t> jobs;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> horizon;
    std::optional<std::string> outdir;
    std::optional<std::string> name;
    bool trace = false;
    bool progress = false;

    void add_to(CLI::App* cmd, const ExperimentConfig* defaults) {
        auto opt = [&](auto& target, const char* flag, const char* help, std::string shown) {
            auto* o = cmd->add_option(flag, target, help);
            if (!shown.empty()) o->default_str(shown);
        };
        const bool d = defaults != nullptr;
        opt(jobs, "--jobs,-j", "worker threads (0 = all cores)", "0");
        opt(seed, "--seed", "master seed", d ? std::to_string(defaults->seed) : "from config");
        opt(trials, "--trials", "Monte-Carlo trials", d ? std::to_string(defaults->trials) : "from config");
        opt(horizon, "--horizon", "steps per trial (k_max)", d ? std::to_string(defaults->horizon) : "from config");
        opt(outdir, "--outdir", "output directory (default: $QIDENT_OUTDIR, else .)", d ? "$QIDENT_OUTDIR or ." : "from config");
        opt(name, "--name", "output file stem", d ? defaults->name : "from config");
        cmd->add_flag("--trace", trace, "also write <name>_trace.csv for trial 0")->default_str("false");
        cmd->add_flag("--progress", progress, "print a per-trial counter to stderr")->default_str("false");
    }

    void apply(ExperimentConfig& cfg) const {
        if (seed) cfg.seed = *seed;
        if (trials) cfg.trials = *trials;
        if (horizon) {
            cfg.horizon = *horizon;
            // An explicit grid rarely survives a new horizon; fall back to the default one.
            if (!cfg.checkpoints.empty() && cfg.checkpoints.back() != cfg.horizon) cfg.checkpoints.clear();
        }
        if (outdir) cfg.outdir = *outdir;
        if (name) cfg.name = *name;
    }
};

std::string resolve_outdir(const ExperimentConfig& cfg) {
    if (!cfg.outdir.empty()) return cfg.outdir;
    if (const char* env = std::getenv("QIDENT_OUTDIR"); env && *env) return env;
    return ".";
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

int run_and_report(const ExperimentConfig& cfg, const RunFlags& flags, std::ostream& out, std::ostream& err) {
    RunOptions opts;
    opts.jobs = flags.jobs.value_or(0);
    if (flags.trace) opts.trace_trial = 0;
    std::mutex mu;
    if (flags.progress)
        opts.progress = [&](std::size_t done, std::size_t total) {
            std::lock_guard lock(mu);
            err << "\rtrial " << done << "/" << total << (done == total ? "\n" : "") << std::flush;
        };

    const ExperimentResult res = run_experiment(cfg, opts);
    const OutputFiles files = write_outputs(cfg, res, resolve_outdir(cfg));

    for (const auto& note : res.notes) err << "note: " << note << "\n";
    out << "wrote " << files.metrics.string() << "\n";
    out << "wrote " << files.meta.string() << "\n";
    if (files.trace) out << "wrote " << files.trace->string() << "\n";

    const AggregateMetrics& m = res.metrics;
    for (EstimatorKind kind : cfg.estimators) {
        const auto& s = m.series(kind);
        out << to_string(kind) << ": mse(k=" << m.k.back() << ") = " << fmt(s.mse.back()) << " +- "
            << fmt(s.mse_se.back()) << ", r1 = " << fmt(efficiency_report(m, kind).back().r1);
        try {
            out << ", slope = " << fmt(rate_slope(m, kind));
        } catch (const DomainError&) {
        }
        out << "\n";
    }
    out << "k*tr(Delta) at k_max = " << fmt(static_cast<double>(m.k.back()) * m.trace_crlb.back()) << "\n";
    return kExitOk;
}

int cmd_validate(const std::string& path, std::ostream& out) {
    const ExperimentConfig cfg = load_config(path);
    out << "config ok: n = " << cfg.dim() << ", " << cfg.thresholds.size() << " thresholds, " << cfg.trials
        << " trials, horizon " << cfg.horizon << "\n";
    if (!cfg.runs(EstimatorKind::Wqnp)) return kExitOk;

    const RegressorStream regs = make_regressors(cfg);
    const auto report = validate_wqnp_weights(ConstantWeights(cfg.alphas, cfg.beta),
                                              BoxDomain(cfg.box_lo, cfg.box_hi), regs.bound(),
                                              QuantizerSpec(cfg.thresholds), GaussianNoise(cfg.sigma), cfg.dim());
    for (const auto& w : report.warnings()) out << "warning: " << w << "\n";
    const auto violations = report.violations();
    for (const auto& v : violations) out << "invalid wqnp weights: " << v << "\n";
    if (!violations.empty()) return kExitInvalid;
    out << "wqnp weights ok\n";
    return kExitOk;
}

struct CrlbFlags {
    std::optional<double> x_min, x_max;
    std::size_t points = 81;
    std::optional<std::size_t> horizon;
    std::optional<std::string> outdir, name;
};

int cmd_crlb(const std::string& path, const CrlbFlags& f, std::ostream& out) {
    ExperimentConfig cfg = load_config(path);
    if (f.horizon) {
        cfg.horizon = *f.horizon;
        cfg.checkpoints.clear();
    }
    if (f.outdir) cfg.outdir = *f.outdir;
    if (f.name) cfg.name = *f.name;
    validate_config(cfg);

    const QuantizerSpec spec(cfg.thresholds);
    const GaussianNoise noise(cfg.sigma);
    const double lo = f.x_min.value_or(cfg.thresholds.front() - 4 * cfg.sigma);
    const double hi = f.x_max.value_or(cfg.thresholds.back() + 4 * cfg.sigma);
    if (!(lo < hi) || f.points < 2) throw ConfigError("--x-min/--x-max/--points", "need x-min < x-max and >= 2 points");

    std::string rho_csv = "x,rho,rho_sigma2\n";
    for (std::size_t i = 0; i < f.points; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(f.points - 1);
        const double r = rho(x, spec, noise);
        rho_csv += fmt(x) + "," + fmt(r) + "," + fmt(r * cfg.sigma * cfg.sigma) + "\n";
    }

    // Bound along the regressors of trial 0 at the true parameter.
    const RegressorStream regs = make_regressors(cfg);
    const CounterRng reg_rng = CounterRng::derive(cfg.seed, 0, 0);
    const auto checkpoints = resolved_checkpoints(cfg);
    CrlbAccumulator acc(cfg.dim(), spec, noise);
    std::string bound_csv = "k,trace_crlb,k_trace_crlb\n";
    std::size_t c = 0;
    for (std::size_t k = 1; c < checkpoints.size(); ++k) {
        const Vec phi = regs.phi(k, reg_rng);
        acc.accumulate(phi, dot(phi, cfg.theta));
        if (k != checkpoints[c]) continue;
        ++c;
        const double tr = bound(acc).trace();
        bound_csv += std::to_string(k) + "," + fmt(tr) + "," + fmt(static_cast<double>(k) * tr) + "\n";
    }

    const std::filesystem::path dir = resolve_outdir(cfg);
    std::filesystem::create_directories(dir);
    for (const auto& [file, text] : {std::pair{dir / (cfg.name + "_rho.csv"), rho_csv},
                                     std::pair{dir / (cfg.name + "_bound.csv"), bound_csv}}) {
        std::ofstream os(file, std::ios::binary);
        os << text;
        os.close();
        if (!os) throw std::runtime_error("cannot write '" + file.string() + "'");
        out << "wrote " << file.string() << "\n";
    }
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Parameter identification from multi-threshold quantized observations", "qident"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    const ExperimentConfig ex1 = example1_config();

    std::string sim_path;
    RunFlags sim_flags;
    auto* sim = app.add_subcommand("simulate", "run WQNP/IBID Monte-Carlo trials from a config file");
    sim->add_option("config", sim_path, "YAML experiment config")->required()->check(CLI::ExistingFile);
    sim_flags.add_to(sim, nullptr);

    RunFlags ex_flags;
    auto* ex = app.add_subcommand("example1", "built-in third-order example preset");
    ex_flags.add_to(ex, &ex1);

    std::string crlb_path;
    CrlbFlags crlb_flags;
    auto* cr = app.add_subcommand("crlb", "evaluate rho(x) on a grid and the bound along the regressors");
    cr->add_option("config", crlb_path, "YAML experiment config")->required()->check(CLI::ExistingFile);
    cr->add_option("--x-min", crlb_flags.x_min, "grid start")->default_str("first threshold - 4 sigma");
    cr->add_option("--x-max", crlb_flags.x_max, "grid end")->default_str("last threshold + 4 sigma");
    cr->add_option("--points", crlb_flags.points, "grid points")->capture_default_str();
    cr->add_option("--horizon", crlb_flags.horizon, "bound horizon")->default_str("from config");
    cr->add_option("--outdir", crlb_flags.outdir, "output directory")->default_str("from config");
    cr->add_option("--name", crlb_flags.name, "output file stem")->default_str("from config");

    std::string val_path;
    auto* val = app.add_subcommand("validate", "check a config and its WQNP weights");
    val->add_option("config", val_path, "YAML experiment config")->required()->check(CLI::ExistingFile);

    std::vector<std::string> argv_store{"qident"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        if (*sim) {
            ExperimentConfig cfg = load_config(sim_path);
            sim_flags.apply(cfg);
            return run_and_report(cfg, sim_flags, out, err);
        }
        if (*ex) {
            ExperimentConfig cfg = ex1;
            ex_flags.apply(cfg);
            return run_and_report(cfg, ex_flags, out, err);
        }
        if (*cr) return cmd_crlb(crlb_path, crlb_flags, out);
        if (*val) return cmd_validate(val_path, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const DomainError& e) {
        err << "invalid input: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitInvalid;
}

} // namespace qident
