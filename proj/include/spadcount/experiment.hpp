#pragma once

// Experiment configuration (JSON), parameter sweeps and the CSV/JSON
// formats written and read back by the command-line tool.

#include <atomic>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "spadcount/montecarlo.hpp"

namespace spadcount {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// ------------------------------------------------------------ number format

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

inline double parse_double(std::string_view text) {
    if (text == "nan" || text.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ConfigError("not a number: '" + std::string(text) + "'");
    return v;
}

inline std::string format_fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// ------------------------------------------------------------------- config

enum class SweepAxis { signal_rate, background_rate, array_scale, dead_time_ratio_fixed_Ts, dead_time_ratio_fixed_tau };

inline std::string_view to_string(SweepAxis a) {
    switch (a) {
    case SweepAxis::signal_rate: return "signal_rate";
    case SweepAxis::background_rate: return "background_rate";
    case SweepAxis::array_scale: return "array_scale";
    case SweepAxis::dead_time_ratio_fixed_Ts: return "dead_time_ratio_fixed_Ts";
    case SweepAxis::dead_time_ratio_fixed_tau: return "dead_time_ratio_fixed_tau";
    }
    return "unknown";
}

inline SweepAxis parse_axis(std::string_view name) {
    for (auto a : {SweepAxis::signal_rate, SweepAxis::background_rate, SweepAxis::array_scale,
                   SweepAxis::dead_time_ratio_fixed_Ts, SweepAxis::dead_time_ratio_fixed_tau})
        if (to_string(a) == name) return a;
    throw ConfigError("unknown sweep axis '" + std::string(name) + "'");
}

struct SweepSpec {
    SweepAxis axis = SweepAxis::signal_rate;
    std::vector<double> values;
};

inline const std::vector<double>& default_level_profile() {
    static const std::vector<double> profile{0.0, 0.1, 0.4, 1.0};
    return profile;
}

/// Either explicit levels or peak * profile fractions.
struct ConstellationSpec {
    std::optional<std::vector<double>> levels;
    double peak_rate = 0.0;
    std::vector<double> profile = default_level_profile();

    [[nodiscard]] PamConstellation build() const {
        if (levels) return PamConstellation(*levels);
        return PamConstellation::from_profile(peak_rate, profile);
    }
    [[nodiscard]] PamConstellation build_with_peak(double peak) const {
        if (levels) throw ConfigError("signal_rate sweeps need a peak_rate_per_ns + profile constellation");
        return PamConstellation::from_profile(peak, profile);
    }
};

struct MonteCarloSpec {
    std::int64_t symbols = 1'000'000;
    std::int64_t warmup_symbols = kDefaultWarmupSymbols;
    std::uint64_t seed = 1;
    SymbolSource source = UniformSymbols{};
};

/// One fully resolved evaluation point.
struct ExperimentPoint {
    double value = std::numeric_limits<double>::quiet_NaN();  // sweep coordinate, NaN for the base point
    ReceiverConfig receiver;
    PamConstellation constellation;
};

struct ExperimentConfig {
    ReceiverConfig receiver;
    ConstellationSpec constellation;
    std::optional<SweepSpec> sweep;
    MonteCarloSpec mc;

    [[nodiscard]] ExperimentPoint base() const { return {std::numeric_limits<double>::quiet_NaN(), receiver, constellation.build()}; }

    [[nodiscard]] ExperimentPoint at(double value) const {
        if (!sweep) throw ConfigError("configuration has no sweep");
        ReceiverConfig r = receiver;
        std::optional<PamConstellation> c;
        switch (sweep->axis) {
        case SweepAxis::signal_rate: c = constellation.build_with_peak(value); break;
        case SweepAxis::background_rate: r.background_rate = value; break;
        case SweepAxis::array_scale: r.array_scale = static_cast<std::int64_t>(std::llround(value)); break;
        case SweepAxis::dead_time_ratio_fixed_Ts: r.dead_time_ns = value * r.symbol_ns; break;
        case SweepAxis::dead_time_ratio_fixed_tau: r.symbol_ns = r.dead_time_ns / value; break;
        }
        r.validate();
        return {value, r, c ? *c : constellation.build()};
    }

    [[nodiscard]] SimSpec sim_spec(const ExperimentPoint& p, std::uint64_t seed) const {
        SimSpec s{p.receiver, p.constellation, mc.source, mc.symbols, mc.warmup_symbols, seed};
        s.validate();
        return s;
    }
};

namespace detail {

inline bool is_comment_key(std::string_view key) {
    return key.starts_with("comment") || key.starts_with("assumption") || key.starts_with("_");
}

inline void reject_unknown(const Json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
    for (const auto& [key, _] : obj.items()) {
        if (is_comment_key(key)) continue;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
}

inline const Json& require(const Json& obj, const char* key, std::string_view where) {
    if (!obj.contains(key)) throw ConfigError(std::string(where) + "." + key + " is required");
    return obj.at(key);
}

inline double number(const Json& v, std::string_view what) {
    if (!v.is_number()) throw ConfigError(std::string(what) + " must be a number");
    return v.get<double>();
}

inline std::int64_t integer(const Json& v, std::string_view what) {
    const double d = number(v, what);
    if (d != std::floor(d) || std::abs(d) > 9.0e15) throw ConfigError(std::string(what) + " must be an integer");
    return static_cast<std::int64_t>(d);
}

inline std::vector<double> number_list(const Json& v, std::string_view what) {
    if (!v.is_array()) throw ConfigError(std::string(what) + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) out.push_back(number(x, what));
    return out;
}

inline std::vector<double> parse_grid(const Json& s) {
    if (s.contains("values")) {
        if (s.contains("start") || s.contains("stop") || s.contains("points"))
            throw ConfigError("sweep: give either values or start/stop/points");
        return number_list(s.at("values"), "sweep.values");
    }
    const double start = number(require(s, "start", "sweep"), "sweep.start");
    const double stop = number(require(s, "stop", "sweep"), "sweep.stop");
    const std::int64_t points = integer(require(s, "points", "sweep"), "sweep.points");
    const std::string spacing = s.value("spacing", std::string("linear"));
    if (points < 1) throw ConfigError("sweep.points must be >= 1");
    std::vector<double> out;
    if (points == 1) return {start};
    if (spacing == "linear") {
        for (std::int64_t i = 0; i < points; ++i)
            out.push_back(start + (stop - start) * static_cast<double>(i) / static_cast<double>(points - 1));
    } else if (spacing == "log") {
        if (!(start > 0.0 && stop > 0.0)) throw ConfigError("log sweep needs positive start and stop");
        const double a = std::log(start), b = std::log(stop);
        for (std::int64_t i = 0; i < points; ++i)
            out.push_back(std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1)));
        out.front() = start;
        out.back() = stop;
    } else {
        throw ConfigError("sweep.spacing must be linear or log");
    }
    return out;
}

inline SymbolSource parse_source(const Json& mc) {
    const std::string kind = mc.value("source", std::string("uniform"));
    if (kind == "uniform") return UniformSymbols{};
    if (kind == "fixed")
        return FixedSymbol{static_cast<std::size_t>(integer(require(mc, "fixed_symbol", "montecarlo"), "fixed_symbol"))};
    if (kind == "sequence") {
        ExplicitSequence e;
        const Json& seq = require(mc, "sequence", "montecarlo");
        if (!seq.is_array()) throw ConfigError("montecarlo.sequence must be an array");
        for (const auto& x : seq) {
            const std::int64_t s = integer(x, "montecarlo.sequence");
            if (s < 0) throw ConfigError("montecarlo.sequence entries must be nonnegative");
            e.symbols.push_back(static_cast<std::size_t>(s));
        }
        return e;
    }
    throw ConfigError("montecarlo.source must be uniform, fixed or sequence");
}

}  // namespace detail

inline ExperimentConfig parse_experiment(const Json& doc) {
    using namespace detail;
    if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
    reject_unknown(doc, {"schema_version", "receiver", "constellation", "sweep", "montecarlo"}, "configuration");
    if (integer(require(doc, "schema_version", "configuration"), "schema_version") != kSchemaVersion)
        throw ConfigError("unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");

    ExperimentConfig cfg;
    const Json& r = require(doc, "receiver", "configuration");
    reject_unknown(r, {"pde", "array_scale", "dead_time_ns", "symbol_ns", "background_rate_per_ns", "dark_rate_per_ns"},
                   "receiver");
    cfg.receiver.pde = number(require(r, "pde", "receiver"), "receiver.pde");
    cfg.receiver.array_scale = integer(require(r, "array_scale", "receiver"), "receiver.array_scale");
    cfg.receiver.dead_time_ns = number(require(r, "dead_time_ns", "receiver"), "receiver.dead_time_ns");
    cfg.receiver.symbol_ns = number(require(r, "symbol_ns", "receiver"), "receiver.symbol_ns");
    if (r.contains("background_rate_per_ns"))
        cfg.receiver.background_rate = number(r.at("background_rate_per_ns"), "receiver.background_rate_per_ns");
    if (r.contains("dark_rate_per_ns"))
        cfg.receiver.dark_rate = number(r.at("dark_rate_per_ns"), "receiver.dark_rate_per_ns");
    cfg.receiver.validate();

    const Json& c = require(doc, "constellation", "configuration");
    reject_unknown(c, {"levels_per_ns", "peak_rate_per_ns", "profile"}, "constellation");
    if (c.contains("levels_per_ns")) {
        if (c.contains("peak_rate_per_ns") || c.contains("profile"))
            throw ConfigError("constellation: give either levels_per_ns or peak_rate_per_ns/profile");
        cfg.constellation.levels = number_list(c.at("levels_per_ns"), "constellation.levels_per_ns");
    } else {
        cfg.constellation.peak_rate = number(require(c, "peak_rate_per_ns", "constellation"), "peak_rate_per_ns");
        if (c.contains("profile")) cfg.constellation.profile = number_list(c.at("profile"), "constellation.profile");
    }

    if (doc.contains("sweep")) {
        const Json& s = doc.at("sweep");
        reject_unknown(s, {"axis", "values", "start", "stop", "points", "spacing"}, "sweep");
        const Json& axis = require(s, "axis", "sweep");
        if (!axis.is_string()) throw ConfigError("sweep.axis must be a string");
        SweepSpec sweep{parse_axis(axis.get<std::string>()), parse_grid(s)};
        if (sweep.values.empty()) throw ConfigError("sweep grid is empty");
        for (std::size_t i = 1; i < sweep.values.size(); ++i)
            if (!(sweep.values[i] > sweep.values[i - 1])) throw ConfigError("sweep grid must be strictly increasing");
        for (double v : sweep.values) {
            if (!std::isfinite(v)) throw ConfigError("sweep values must be finite");
            switch (sweep.axis) {
            case SweepAxis::array_scale:
                if (v < 1.0 || v != std::floor(v)) throw ConfigError("array_scale sweep values must be integers >= 1");
                break;
            case SweepAxis::dead_time_ratio_fixed_Ts:
            case SweepAxis::dead_time_ratio_fixed_tau:
                if (!(v > 0.0)) throw ConfigError("dead-time ratio sweep values must be positive");
                break;
            default:
                if (v < 0.0) throw ConfigError("rate sweep values must be nonnegative");
            }
        }
        cfg.sweep = std::move(sweep);
    }

    if (doc.contains("montecarlo")) {
        const Json& mc = doc.at("montecarlo");
        reject_unknown(mc, {"symbols", "warmup_symbols", "seed", "source", "fixed_symbol", "sequence"}, "montecarlo");
        if (mc.contains("symbols")) cfg.mc.symbols = integer(mc.at("symbols"), "montecarlo.symbols");
        if (mc.contains("warmup_symbols"))
            cfg.mc.warmup_symbols = integer(mc.at("warmup_symbols"), "montecarlo.warmup_symbols");
        if (mc.contains("seed")) {
            const Json& seed = mc.at("seed");
            if (!seed.is_number_unsigned()) throw ConfigError("montecarlo.seed must be a nonnegative integer");
            cfg.mc.seed = seed.get<std::uint64_t>();
        }
        cfg.mc.source = parse_source(mc);
    }
    if (cfg.mc.symbols < 1) throw ConfigError("montecarlo.symbols must be >= 1");
    if (cfg.mc.warmup_symbols < 0 || cfg.mc.warmup_symbols >= cfg.mc.symbols)
        throw ConfigError("montecarlo.warmup_symbols must lie in [0, symbols)");
    return cfg;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw ConfigError("cannot read '" + path.string() + "'");
    return ss.str();
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
    Json doc;
    try {
        doc = Json::parse(read_text_file(path));
    } catch (const Json::exception& e) {
        throw ConfigError("'" + path.string() + "': " + e.what());
    }
    try {
        return parse_experiment(doc);
    } catch (const ConfigError& e) {
        throw ConfigError("'" + path.string() + "': " + e.what());
    }
}

// ------------------------------------------------------------------- sweeps

struct SymbolSummary {
    double mean = 0.0;
    double variance = 0.0;
    double deficit = 0.0;
};

struct ResultRow {
    double value = 0.0;
    Regime regime = Regime::low_medium;
    std::vector<SymbolSummary> symbols;
    double ser_ml = 0.0;
    double ser_threshold = 0.0;
    std::optional<ProportionEstimate> empirical_ml;
    std::optional<ProportionEstimate> empirical_threshold;
    std::vector<double> thresholds;
    std::optional<double> wall_time_s;
};

struct SweepOptions {
    bool run_mc = true;
    unsigned workers = 1;
    bool timing = false;
};

/// Analytic model, thresholds and (optionally) both empirical SERs for one point.
inline ResultRow evaluate_point(const ExperimentConfig& cfg, const ExperimentPoint& p, std::size_t grid_index,
                                bool run_mc, unsigned mc_workers) {
    ResultRow row;
    row.value = p.value;
    const SymbolModel model = build_symbol_model(p.receiver, p.constellation);
    row.regime = model.regime;
    for (const auto& pmf : model.pmfs) row.symbols.push_back({pmf.mean(), pmf.variance(), pmf.deficit});
    const ThresholdSet ts = closed_form_thresholds(p.receiver, p.constellation);
    row.thresholds = ts.thresholds;
    row.ser_ml = ser_ml(model);
    row.ser_threshold = ser_threshold(model, ts);
    if (run_mc) {
        if (!std::holds_alternative<UniformSymbols>(cfg.mc.source))
            throw ConfigError("SER estimation needs montecarlo.source = uniform");
        const auto seed = substream_seed(cfg.mc.seed, StreamKind::sweep_point, grid_index);
        const SimTrace trace = simulate_array_symbols(cfg.sim_spec(p, seed), mc_workers);
        row.empirical_ml = empirical_ser(trace, ml_decision_rule(model));
        row.empirical_threshold = empirical_ser(trace, threshold_decision_rule(ts, model.k_max()));
    }
    return row;
}

/// Every grid point, ordered by grid index whatever the completion order.
inline std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg, const SweepOptions& opt) {
    if (!cfg.sweep) throw ConfigError("ser-sweep needs a sweep block");
    const auto& values = cfg.sweep->values;

    // Resolve and classify every point before any work starts.
    std::vector<ExperimentPoint> points;
    for (double v : values) {
        try {
            ExperimentPoint p = cfg.at(v);
            if (classify(p.receiver) == Regime::unsupported)
                throw DomainError("dead-time ratio " + format_double(dead_time_ratio(p.receiver)) +
                                  " is neither < 1 nor an integer");
            points.push_back(std::move(p));
        } catch (const DomainError& e) {
            throw DomainError(std::string(to_string(cfg.sweep->axis)) + "=" + format_double(v) + ": " + e.what());
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(to_string(cfg.sweep->axis)) + "=" + format_double(v) + ": " + e.what());
        }
    }

    const unsigned workers = std::max(1U, std::min<unsigned>(resolve_workers(opt.workers),
                                                             static_cast<unsigned>(points.size())));
    const unsigned mc_workers = std::max(1U, resolve_workers(opt.workers) / workers);
    std::vector<ResultRow> rows(points.size());
    std::vector<std::exception_ptr> failures(points.size());
    std::atomic<std::size_t> next{0};

    auto drain = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++) {
            const auto t0 = std::chrono::steady_clock::now();
            try {
                rows[i] = evaluate_point(cfg, points[i], i, opt.run_mc, mc_workers);
            } catch (...) {
                failures[i] = std::current_exception();
                continue;
            }
            if (opt.timing)
                rows[i].wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };
    if (workers == 1) {
        drain();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(drain);
    }
    for (std::size_t i = 0; i < failures.size(); ++i) {
        if (!failures[i]) continue;
        const std::string where = std::string(to_string(cfg.sweep->axis)) + "=" + format_double(values[i]) + ": ";
        try {
            std::rethrow_exception(failures[i]);
        } catch (const DomainError& e) {
            throw DomainError(where + e.what());
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    return rows;
}

// ---------------------------------------------------------------------- CSV

/// Comma-separated table with `# key=value` trailer lines.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::pair<std::string, std::string>> trailers;

    [[nodiscard]] std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ConfigError("CSV has no column '" + std::string(name) + "'");
    }
    [[nodiscard]] double number(std::size_t row, std::string_view name) const {
        return parse_double(rows.at(row).at(column(name)));
    }
    [[nodiscard]] std::optional<std::string> trailer(std::string_view key) const {
        for (const auto& [k, v] : trailers)
            if (k == key) return v;
        return std::nullopt;
    }
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline CsvTable parse_csv(std::string_view text) {
    CsvTable t;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.starts_with("#")) {
            std::string_view body(line);
            body.remove_prefix(1);
            while (body.starts_with(' ')) body.remove_prefix(1);
            const auto eq = body.find('=');
            if (eq == std::string_view::npos)
                t.trailers.emplace_back(std::string(body), "");
            else
                t.trailers.emplace_back(std::string(body.substr(0, eq)), std::string(body.substr(eq + 1)));
            continue;
        }
        auto cells = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
        } else {
            if (cells.size() != t.header.size()) throw ConfigError("CSV row width does not match header");
            t.rows.push_back(std::move(cells));
        }
    }
    return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path)); }

namespace detail {
inline void write_row(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
}
inline std::string optional_cell(const std::optional<double>& v) { return v ? format_double(*v) : ""; }
}  // namespace detail

inline std::vector<std::string> sweep_header(const ExperimentConfig& cfg, std::size_t order, bool timing) {
    std::vector<std::string> h{std::string(to_string(cfg.sweep->axis)), "regime"};
    for (std::size_t m = 0; m < order; ++m) {
        h.push_back("mean_" + std::to_string(m));
        h.push_back("variance_" + std::to_string(m));
        h.push_back("deficit_" + std::to_string(m));
    }
    for (const char* c : {"ser_ml", "ser_threshold", "emp_ser_ml", "emp_ser_ml_lo", "emp_ser_ml_hi",
                          "emp_ser_threshold", "emp_ser_threshold_lo", "emp_ser_threshold_hi"})
        h.emplace_back(c);
    for (std::size_t m = 0; m + 1 < order; ++m) h.push_back("threshold_" + std::to_string(m));
    if (timing) h.emplace_back("wall_time_s");
    return h;
}

inline void write_sweep_csv(std::ostream& os, const ExperimentConfig& cfg, const std::vector<ResultRow>& rows,
                            const SweepOptions& opt) {
    const std::size_t order = rows.empty() ? cfg.at(cfg.sweep->values.front()).constellation.order()
                                           : rows.front().symbols.size();
    detail::write_row(os, sweep_header(cfg, order, opt.timing));
    auto est = [](const std::optional<ProportionEstimate>& e, int which) -> std::optional<double> {
        if (!e) return std::nullopt;
        return which == 0 ? e->estimate : which == 1 ? e->lower : e->upper;
    };
    for (const auto& r : rows) {
        std::vector<std::string> cells{format_double(r.value), std::string(to_string(r.regime))};
        for (const auto& s : r.symbols) {
            cells.push_back(format_double(s.mean));
            cells.push_back(format_double(s.variance));
            cells.push_back(format_double(s.deficit));
        }
        cells.push_back(format_double(r.ser_ml));
        cells.push_back(format_double(r.ser_threshold));
        for (const auto* e : {&r.empirical_ml, &r.empirical_threshold})
            for (int w = 0; w < 3; ++w) cells.push_back(detail::optional_cell(est(*e, w)));
        for (double th : r.thresholds) cells.push_back(format_double(th));
        if (opt.timing) cells.push_back(detail::optional_cell(r.wall_time_s));
        detail::write_row(os, cells);
    }
    os << "# schema_version=" << kSchemaVersion << '\n';
    os << "# command=ser-sweep\n";
    os << "# axis=" << to_string(cfg.sweep->axis) << '\n';
    os << "# montecarlo=" << (opt.run_mc ? "on" : "off") << '\n';
    if (opt.run_mc) {
        os << "# seed=" << cfg.mc.seed << '\n';
        os << "# symbols=" << cfg.mc.symbols << '\n';
        os << "# warmup_symbols=" << cfg.mc.warmup_symbols << '\n';
        os << "# ci=wilson95\n";
    }
}

// ---------------------------------------------------------------------- PMF

struct PmfComparison {
    CountPmf analytic;
    std::optional<CountPmf> empirical;
    [[nodiscard]] std::optional<double> tvd() const {
        if (!empirical) return std::nullopt;
        return total_variation(analytic, *empirical);
    }
};

/// Analytic and empirical PMFs for every symbol of a point, from one run.
inline std::vector<PmfComparison> compare_pmfs(const ExperimentConfig& cfg, const ExperimentPoint& p, bool run_mc,
                                               unsigned workers) {
    const SymbolModel model = build_symbol_model(p.receiver, p.constellation);
    std::vector<PmfComparison> out;
    for (const auto& pmf : model.pmfs) out.push_back({pmf, std::nullopt});
    if (run_mc) {
        const SimTrace trace = simulate_array_symbols(cfg.sim_spec(p, cfg.mc.seed), workers);
        for (std::size_t m = 0; m < out.size(); ++m) {
            const bool present = std::any_of(trace.symbols.begin() + trace.warmup_symbols, trace.symbols.end(),
                                             [&](std::uint16_t s) { return s == m; });
            if (present) out[m].empirical = empirical_pmf(trace, m, model.k_max());
        }
    }
    return out;
}

inline void write_pmf_csv(std::ostream& os, const PmfComparison& cmp, std::size_t symbol,
                          const ExperimentConfig& cfg) {
    os << "k,analytic,empirical\n";
    for (std::size_t k = 0; k <= cmp.analytic.k_max(); ++k) {
        os << k << ',' << format_double(cmp.analytic[k]) << ','
           << (cmp.empirical ? format_double((*cmp.empirical)[k]) : "") << '\n';
    }
    if (const auto tvd = cmp.tvd()) os << "# tvd=" << format_double(*tvd) << '\n';
    os << "# schema_version=" << kSchemaVersion << '\n';
    os << "# command=pmf\n";
    os << "# symbol=" << symbol << '\n';
    os << "# model=" << to_string(cmp.analytic.tag) << '\n';
    os << "# deficit=" << format_double(cmp.analytic.deficit) << '\n';
    if (cmp.empirical) {
        os << "# seed=" << cfg.mc.seed << '\n';
        os << "# symbols=" << cfg.mc.symbols << '\n';
    }
}

// --------------------------------------------------------------- thresholds

inline Json thresholds_json(const ThresholdSet& ts) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["regime"] = std::string(to_string(ts.regime));
    j["intermediate_kind"] = ts.regime == Regime::low_medium ? "rate_per_ns" : "p_apr";
    j["thresholds"] = ts.thresholds;
    j["intermediates"] = ts.intermediates;
    return j;
}

inline ThresholdSet thresholds_from_json(const Json& j) {
    try {
        if (j.at("schema_version").get<int>() != kSchemaVersion) throw ConfigError("unsupported schema_version");
        ThresholdSet ts;
        const auto regime = j.at("regime").get<std::string>();
        if (regime == "low_medium")
            ts.regime = Regime::low_medium;
        else if (regime == "high")
            ts.regime = Regime::high;
        else
            throw ConfigError("unknown regime '" + regime + "'");
        ts.thresholds = j.at("thresholds").get<std::vector<double>>();
        ts.intermediates = j.at("intermediates").get<std::vector<double>>();
        return ts;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("thresholds JSON: ") + e.what());
    }
}

inline void write_threshold_table(std::ostream& os, const ThresholdSet& ts) {
    const bool low = ts.regime == Regime::low_medium;
    os << "regime " << to_string(ts.regime) << (low ? " (single-SPAD equivalent)" : " (binomial equivalent)")
       << '\n';
    os << "symbol  " << (low ? "rate_per_ns" : "p_apr") << '\n';
    for (std::size_t m = 0; m < ts.intermediates.size(); ++m) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", ts.intermediates[m]);
        os << "x" << m + 1 << "      " << buf << '\n';
    }
    os << "pair    threshold\n";
    for (std::size_t m = 0; m < ts.thresholds.size(); ++m)
        os << "x" << m + 1 << "|x" << m + 2 << "   " << format_fixed4(ts.thresholds[m]) << '\n';
}

// ------------------------------------------------------------------ traces

inline void write_trace_csv(std::ostream& os, const SimTrace& trace, const SimSpec& spec,
                            const std::vector<std::vector<std::uint32_t>>* per_pixel) {
    os << "n,symbol,count";
    if (per_pixel)
        for (std::size_t p = 0; p < per_pixel->size(); ++p) os << ",pixel_" << p;
    os << '\n';
    for (std::size_t i = 0; i < trace.symbols.size(); ++i) {
        os << i << ',' << trace.symbols[i] << ',' << trace.counts[i];
        if (per_pixel)
            for (const auto& px : *per_pixel) os << ',' << px[i];
        os << '\n';
    }
    os << "# schema_version=" << kSchemaVersion << '\n';
    os << "# command=simulate\n";
    os << "# seed=" << spec.seed << '\n';
    os << "# symbols=" << spec.n_symbols << '\n';
    os << "# warmup_symbols=" << spec.warmup_symbols << '\n';
    os << "# max_counts=" << max_counts(spec.config) << '\n';
}

}  // namespace spadcount
