#pragma once

// Event-level simulation of non-paralyzable SPAD pixels driven by Poisson
// arrivals whose rate is piecewise constant over symbols.
//
// Time is kept as (symbol index, offset within the symbol). Offsets never
// exceed one symbol, so rounding does not accumulate over long runs and any
// positive dead time is representable.

#include <random>
#include <thread>
#include <variant>

#include "spadcount/detection.hpp"

namespace spadcount {

// ---------------------------------------------------------------- RNG streams

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

enum class StreamKind : std::uint64_t { symbols = 1, pixel = 2, sweep_point = 3 };

/// Seed for substream (kind, index) of a run. Each pixel owns a stream and
/// the symbol sequence owns another, so no partition of pixels across
/// workers changes any draw.
inline std::uint64_t substream_seed(std::uint64_t seed, StreamKind kind, std::uint64_t index) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(kind));
    return splitmix64(h ^ splitmix64(index));
}

/// mt19937_64 with distribution code fixed here rather than left to the
/// standard library, so draws are identical across toolchains.
class Rng {
    __extension__ using u128 = unsigned __int128;

public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double exponential() { return -std::log1p(-uniform()); }

    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<u128>(engine_()) * n) >> 64);
    }

private:
    std::mt19937_64 engine_;
};

// --------------------------------------------------------------- single pixel

/// An instant as (symbol, offset) with 0 <= offset < T_s.
struct SymbolTime {
    std::int64_t symbol = 0;
    double offset = 0.0;

    friend bool operator<(const SymbolTime& a, const SymbolTime& b) {
        return a.symbol != b.symbol ? a.symbol < b.symbol : a.offset < b.offset;
    }
    friend bool operator<=(const SymbolTime& a, const SymbolTime& b) { return !(b < a); }
};

/// `from` advanced by `delay` ns, renormalized to an offset in [0, T_s).
inline SymbolTime advance(SymbolTime from, double delay, double symbol_ns) {
    double u = from.offset + delay;
    const double whole = std::floor(u / symbol_ns);
    from.symbol += static_cast<std::int64_t>(whole);
    u -= whole * symbol_ns;
    while (u >= symbol_ns) {
        u -= symbol_ns;
        ++from.symbol;
    }
    while (u < 0.0) {
        u += symbol_ns;
        --from.symbol;
    }
    from.offset = u;
    return from;
}

/// The instant the pixel becomes active again.
struct PixelState {
    SymbolTime next_free;
};

namespace detail {

/// Walks one pixel across `rates` (per-symbol, per-pixel). Calls
/// on_count(SymbolTime) for every registered detection.
///
/// A unit exponential is consumed against the integrated rate. When it
/// outlasts the current symbol the unused part carries into the next symbol
/// at the new rate; arrivals are memoryless, so this is exact. During dead
/// time arrivals are lost and a fresh exponential starts at next_free.
template <class OnCount>
void walk_pixel(std::span<const double> rates, double symbol_ns, double dead_time_ns, Rng& rng,
                OnCount&& on_count) {
    const auto n = static_cast<std::int64_t>(rates.size());
    PixelState state;
    SymbolTime cursor;
    double hazard = rng.exponential();
    while (cursor.symbol < n) {
        const double rate = rates[static_cast<std::size_t>(cursor.symbol)];
        const double room = symbol_ns - cursor.offset;
        if (rate > 0.0 && hazard < rate * room) {
            SymbolTime hit{cursor.symbol, std::min(cursor.offset + hazard / rate, std::nextafter(symbol_ns, 0.0))};
            on_count(hit);
            state.next_free = advance(hit, dead_time_ns, symbol_ns);
            cursor = state.next_free;
            hazard = rng.exponential();
        } else {
            hazard -= rate * room;
            ++cursor.symbol;
            cursor.offset = 0.0;
        }
    }
}

}  // namespace detail

/// Per-symbol counts of one pixel. Dead time carries across symbols.
inline std::vector<std::uint32_t> simulate_pixel_symbols(std::span<const double> rates, const ReceiverConfig& config,
                                                         std::uint64_t seed) {
    config.validate();
    for (double r : rates)
        if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("simulate_pixel_symbols: rates must be nonnegative");
    std::vector<std::uint32_t> counts(rates.size(), 0);
    Rng rng(seed);
    detail::walk_pixel(rates, config.symbol_ns, config.dead_time_ns, rng,
                       [&](const SymbolTime& t) { ++counts[static_cast<std::size_t>(t.symbol)]; });
    return counts;
}

/// Registration instants of one pixel, for replay checks.
inline std::vector<SymbolTime> simulate_pixel_events(std::span<const double> rates, const ReceiverConfig& config,
                                                     std::uint64_t seed) {
    config.validate();
    std::vector<SymbolTime> events;
    Rng rng(seed);
    detail::walk_pixel(rates, config.symbol_ns, config.dead_time_ns, rng,
                       [&](const SymbolTime& t) { events.push_back(t); });
    return events;
}

/// Re-checks a registration log: every event at or after the previous
/// event's next_free instant. Returns the index of the first violation, or
/// events.size() when the log is clean.
inline std::size_t replay_violation(std::span<const SymbolTime> events, const ReceiverConfig& config) {
    PixelState state{{std::numeric_limits<std::int64_t>::min(), 0.0}};
    for (std::size_t i = 0; i < events.size(); ++i) {
        const SymbolTime& e = events[i];
        if (!(e.offset >= 0.0 && e.offset < config.symbol_ns)) return i;
        if (e < state.next_free) return i;
        state.next_free = advance(e, config.dead_time_ns, config.symbol_ns);
    }
    return events.size();
}

// ---------------------------------------------------------------------- array

struct FixedSymbol {
    std::size_t index = 0;
};
struct UniformSymbols {};
/// Repeated cyclically to fill the run.
struct ExplicitSequence {
    std::vector<std::size_t> symbols;
};
using SymbolSource = std::variant<FixedSymbol, UniformSymbols, ExplicitSequence>;

inline constexpr std::int64_t kDefaultWarmupSymbols = 16;

struct SimSpec {
    ReceiverConfig config;
    PamConstellation constellation;
    SymbolSource source = UniformSymbols{};
    std::int64_t n_symbols = 1;
    std::int64_t warmup_symbols = kDefaultWarmupSymbols;
    std::uint64_t seed = 0;

    void validate() const {
        config.validate();
        if (n_symbols < 1) throw ConfigError("n_symbols must be >= 1");
        if (warmup_symbols < 0 || warmup_symbols >= n_symbols)
            throw ConfigError("warmup_symbols must lie in [0, n_symbols)");
        const std::size_t m = constellation.order();
        if (const auto* f = std::get_if<FixedSymbol>(&source); f && f->index >= m)
            throw ConfigError("fixed symbol index out of range");
        if (const auto* e = std::get_if<ExplicitSequence>(&source)) {
            if (e->symbols.empty()) throw ConfigError("explicit symbol sequence is empty");
            for (std::size_t s : e->symbols)
                if (s >= m) throw ConfigError("explicit symbol index out of range");
        }
    }
};

/// Transmitted symbols and total array counts for a whole run, warmup included.
struct SimTrace {
    std::vector<std::uint16_t> symbols;
    std::vector<std::uint32_t> counts;
    std::int64_t warmup_symbols = 0;
};

inline std::vector<std::uint16_t> draw_symbols(const SimSpec& spec) {
    std::vector<std::uint16_t> out(static_cast<std::size_t>(spec.n_symbols));
    std::visit(
        [&](const auto& src) {
            using T = std::decay_t<decltype(src)>;
            if constexpr (std::is_same_v<T, FixedSymbol>) {
                std::fill(out.begin(), out.end(), static_cast<std::uint16_t>(src.index));
            } else if constexpr (std::is_same_v<T, UniformSymbols>) {
                Rng rng(substream_seed(spec.seed, StreamKind::symbols, 0));
                for (auto& s : out) s = static_cast<std::uint16_t>(rng.below(spec.constellation.order()));
            } else {
                for (std::size_t i = 0; i < out.size(); ++i)
                    out[i] = static_cast<std::uint16_t>(src.symbols[i % src.symbols.size()]);
            }
        },
        spec.source);
    return out;
}

inline std::vector<double> symbol_rates(const SimSpec& spec, std::span<const std::uint16_t> symbols) {
    const auto table = per_pixel_rates(spec.config, spec.constellation);
    std::vector<double> rates(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) rates[i] = table[symbols[i]];
    return rates;
}

/// Counts of one pixel of the array, reproducing its share of simulate_array_symbols.
inline std::vector<std::uint32_t> simulate_array_pixel(const SimSpec& spec, std::int64_t pixel) {
    spec.validate();
    if (pixel < 0 || pixel >= spec.config.array_scale) throw ConfigError("pixel index out of range");
    const auto symbols = draw_symbols(spec);
    const auto rates = symbol_rates(spec, symbols);
    return simulate_pixel_symbols(rates, spec.config,
                                  substream_seed(spec.seed, StreamKind::pixel, static_cast<std::uint64_t>(pixel)));
}

inline unsigned resolve_workers(unsigned workers) {
    if (workers != 0) return workers;
    return std::max(1U, std::thread::hardware_concurrency());
}

/// Sums N_A independent pixels. Pixels are split into contiguous blocks
/// across `workers` threads (0 = hardware concurrency); the integer
/// reduction makes the result independent of the split.
inline SimTrace simulate_array_symbols(const SimSpec& spec, unsigned workers = 1) {
    spec.validate();
    SimTrace trace;
    trace.warmup_symbols = spec.warmup_symbols;
    trace.symbols = draw_symbols(spec);
    const auto rates = symbol_rates(spec, trace.symbols);
    const std::int64_t pixels = spec.config.array_scale;
    const auto nw = static_cast<std::int64_t>(std::min<std::int64_t>(resolve_workers(workers), pixels));

    auto run_block = [&](std::int64_t begin, std::int64_t end, std::vector<std::uint32_t>& acc) {
        acc.assign(rates.size(), 0);
        for (std::int64_t p = begin; p < end; ++p) {
            Rng rng(substream_seed(spec.seed, StreamKind::pixel, static_cast<std::uint64_t>(p)));
            detail::walk_pixel(rates, spec.config.symbol_ns, spec.config.dead_time_ns, rng,
                               [&](const SymbolTime& t) { ++acc[static_cast<std::size_t>(t.symbol)]; });
        }
    };

    std::vector<std::vector<std::uint32_t>> partial(static_cast<std::size_t>(nw));
    if (nw == 1) {
        run_block(0, pixels, partial[0]);
    } else {
        std::vector<std::jthread> pool;
        for (std::int64_t w = 0; w < nw; ++w) {
            const std::int64_t begin = pixels * w / nw, end = pixels * (w + 1) / nw;
            pool.emplace_back([&, begin, end, w] { run_block(begin, end, partial[static_cast<std::size_t>(w)]); });
        }
    }
    trace.counts = std::move(partial[0]);
    for (std::size_t w = 1; w < partial.size(); ++w)
        for (std::size_t i = 0; i < trace.counts.size(); ++i) trace.counts[i] += partial[w][i];
    return trace;
}

/// Normalized histogram of post-warmup counts for `target`, support 0..k_max.
inline CountPmf empirical_pmf(const SimTrace& trace, std::size_t target, std::size_t k_max) {
    CountPmf out;
    out.tag = ModelTag::empirical;
    std::vector<std::uint64_t> hist(k_max + 1, 0);
    std::uint64_t seen = 0;
    for (std::size_t i = static_cast<std::size_t>(trace.warmup_symbols); i < trace.symbols.size(); ++i) {
        if (trace.symbols[i] != target) continue;
        const std::uint32_t k = trace.counts[i];
        if (k > k_max) throw DomainError("empirical_pmf: count " + std::to_string(k) + " exceeds k_max");
        ++hist[k];
        ++seen;
    }
    if (seen == 0) throw DomainError("empirical_pmf: target symbol never transmitted after warmup");
    out.probs.resize(k_max + 1);
    for (std::size_t k = 0; k <= k_max; ++k) out.probs[k] = static_cast<double>(hist[k]) / static_cast<double>(seen);
    return out;
}

inline CountPmf empirical_pmf(const SimSpec& spec, std::size_t target, unsigned workers = 1) {
    return empirical_pmf(simulate_array_symbols(spec, workers), target,
                         static_cast<std::size_t>(max_counts(spec.config)));
}

/// Binomial proportion with a Wilson score interval.
struct ProportionEstimate {
    std::uint64_t successes = 0;
    std::uint64_t trials = 0;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 1.0;
};

inline constexpr double kZ95 = 1.959963984540054;

inline ProportionEstimate wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = kZ95) {
    ProportionEstimate e{successes, trials, 0.0, 0.0, 1.0};
    if (trials == 0) return e;
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    const double half = z / (1.0 + z2 / n) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    e.estimate = p;
    e.lower = std::clamp(centre - half, 0.0, p);
    e.upper = std::clamp(centre + half, p, 1.0);
    return e;
}

/// Fraction of post-warmup symbols the rule decides wrongly.
inline ProportionEstimate empirical_ser(const SimTrace& trace, const DecisionRule& rule) {
    std::uint64_t errors = 0, total = 0;
    for (std::size_t i = static_cast<std::size_t>(trace.warmup_symbols); i < trace.symbols.size(); ++i) {
        errors += rule.decide(trace.counts[i]) != trace.symbols[i];
        ++total;
    }
    return wilson_interval(errors, total);
}

inline ProportionEstimate empirical_ser(const SimSpec& spec, const DecisionRule& rule, unsigned workers = 1) {
    if (!std::holds_alternative<UniformSymbols>(spec.source))
        throw ConfigError("empirical_ser needs equally likely random symbols");
    return empirical_ser(simulate_array_symbols(spec, workers), rule);
}

}  // namespace spadcount
