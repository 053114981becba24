// spadcount: photon-count models, thresholds, SER sweeps and Monte-Carlo
// traces for SPAD-array PAM receivers.
//
// Exit codes: 0 ok, 2 configuration or file error, 3 model-domain error.

#include <CLI11.hpp>
#include <iostream>

#include "spadcount/experiment.hpp"

namespace sc = spadcount;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDomain = 3;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> trials;
    bool skip_mc = false;
    std::string out;
    unsigned workers = 1;
};

sc::ExperimentConfig load(const CommonFlags& f) {
    sc::ExperimentConfig cfg = sc::load_experiment(f.config);
    if (f.seed) cfg.mc.seed = *f.seed;
    if (f.trials) {
        if (*f.trials < 1) throw sc::ConfigError("--trials must be >= 1");
        cfg.mc.symbols = *f.trials;
        if (cfg.mc.warmup_symbols >= cfg.mc.symbols) cfg.mc.warmup_symbols = 0;
    }
    return cfg;
}

/// Writes through `fn` to the --out path, or to stdout.
template <class Fn>
void emit(const std::string& out, Fn&& fn) {
    if (out.empty()) {
        fn(std::cout);
        std::cout.flush();
        if (!std::cout) throw sc::ConfigError("write to stdout failed");
        return;
    }
    std::ofstream os(out, std::ios::binary | std::ios::trunc);
    if (!os) throw sc::ConfigError("cannot open '" + out + "' for writing");
    fn(os);
    os.close();
    if (!os) throw sc::ConfigError("write to '" + out + "' failed");
}

std::string with_suffix(const std::string& path, std::size_t symbol) {
    const std::filesystem::path p(path);
    std::filesystem::path q = p.parent_path() / (p.stem().string() + "_sym" + std::to_string(symbol));
    q += p.extension();
    return q.string();
}

int cmd_pmf(const CommonFlags& f, const std::string& symbol) {
    const auto cfg = load(f);
    const auto point = cfg.base();
    const auto pmfs = sc::compare_pmfs(cfg, point, !f.skip_mc, f.workers);
    std::vector<std::size_t> which;
    if (symbol == "all") {
        for (std::size_t m = 0; m < pmfs.size(); ++m) which.push_back(m);
    } else {
        std::size_t m = 0;
        const auto res = std::from_chars(symbol.data(), symbol.data() + symbol.size(), m);
        if (res.ec != std::errc{} || res.ptr != symbol.data() + symbol.size() || m >= pmfs.size())
            throw sc::ConfigError("--symbol must be 'all' or an index below " + std::to_string(pmfs.size()));
        which.push_back(m);
    }
    for (std::size_t m : which) {
        if (!f.skip_mc && !pmfs[m].empirical)
            std::cerr << "spadcount: symbol " << m << " never transmitted after warmup; empirical column empty\n";
    }
    if (which.size() == 1) {
        emit(f.out, [&](std::ostream& os) { sc::write_pmf_csv(os, pmfs[which[0]], which[0], cfg); });
        return kExitOk;
    }
    for (std::size_t m : which) {
        if (f.out.empty()) {
            sc::write_pmf_csv(std::cout, pmfs[m], m, cfg);
        } else {
            emit(with_suffix(f.out, m), [&](std::ostream& os) { sc::write_pmf_csv(os, pmfs[m], m, cfg); });
        }
    }
    return kExitOk;
}

int cmd_ser_sweep(const CommonFlags& f, bool timing) {
    const auto cfg = load(f);
    const sc::SweepOptions opt{!f.skip_mc, f.workers, timing};
    const auto rows = sc::run_sweep(cfg, opt);
    emit(f.out, [&](std::ostream& os) { sc::write_sweep_csv(os, cfg, rows, opt); });
    return kExitOk;
}

int cmd_thresholds(const CommonFlags& f) {
    const auto cfg = load(f);
    const auto point = cfg.base();
    const auto ts = sc::closed_form_thresholds(point.receiver, point.constellation);
    sc::write_threshold_table(std::cout, ts);
    if (!f.out.empty()) emit(f.out, [&](std::ostream& os) { os << sc::thresholds_json(ts).dump(2) << '\n'; });
    return kExitOk;
}

int cmd_simulate(const CommonFlags& f, bool per_pixel) {
    const auto cfg = load(f);
    const auto point = cfg.base();
    const sc::SimSpec spec = cfg.sim_spec(point, cfg.mc.seed);
    const sc::SimTrace trace = sc::simulate_array_symbols(spec, f.workers);
    std::vector<std::vector<std::uint32_t>> pixels;
    if (per_pixel) {
        for (std::int64_t p = 0; p < spec.config.array_scale; ++p) pixels.push_back(sc::simulate_array_pixel(spec, p));
    }
    emit(f.out, [&](std::ostream& os) { sc::write_trace_csv(os, trace, spec, per_pixel ? &pixels : nullptr); });
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SPAD-array photon-counting receiver models and Monte-Carlo oracle"};
    app.require_subcommand(1);
    CommonFlags flags;

    auto add_common = [&](CLI::App* sub, bool mc) {
        sub->add_option("--config", flags.config, "experiment JSON")->required();
        sub->add_option("--out", flags.out, "output path (default stdout)");
        if (mc) {
            sub->add_option("--seed", flags.seed, "override montecarlo.seed");
            sub->add_option("--trials", flags.trials, "override montecarlo.symbols");
            sub->add_option("--workers", flags.workers, "worker threads (0 = all cores)")->capture_default_str();
        }
    };

    std::string symbol = "all";
    bool timing = false;
    bool per_pixel = false;

    auto* pmf = app.add_subcommand("pmf", "analytic vs empirical count PMF (k,analytic,empirical)");
    add_common(pmf, true);
    pmf->add_option("--symbol", symbol, "symbol index or 'all' (one file per symbol)")->capture_default_str();
    pmf->add_flag("--skip-mc", flags.skip_mc, "analytic column only");

    auto* sweep = app.add_subcommand("ser-sweep", "analytic and empirical SER over the configured sweep");
    add_common(sweep, true);
    sweep->add_flag("--skip-mc", flags.skip_mc, "analytic columns only");
    sweep->add_flag("--timing", timing, "append a wall_time_s column (not reproducible)");

    auto* thr = app.add_subcommand("thresholds", "closed-form decision thresholds");
    add_common(thr, false);

    auto* sim = app.add_subcommand("simulate", "raw (symbol, count) trace");
    add_common(sim, true);
    sim->add_flag("--per-pixel", per_pixel, "append one count column per pixel");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*pmf) return cmd_pmf(flags, symbol);
        if (*sweep) return cmd_ser_sweep(flags, timing);
        if (*thr) return cmd_thresholds(flags);
        if (*sim) return cmd_simulate(flags, per_pixel);
    } catch (const sc::DomainError& e) {
        std::cerr << "spadcount: model domain error: " << e.what() << '\n';
        return kExitDomain;
    } catch (const sc::ConfigError& e) {
        std::cerr << "spadcount: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "spadcount: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}
