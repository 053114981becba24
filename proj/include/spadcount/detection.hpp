#pragma once

// Per-symbol count models for M-PAM, likelihood ratios, closed-form
// thresholds and the adjacent-pair symbol error rate under ML and threshold
// detection.

#include <limits>

#include "spadcount/markov.hpp"
#include "spadcount/renewal.hpp"

namespace spadcount {

struct SymbolModel {
    PamConstellation constellation;
    std::vector<CountPmf> pmfs;  // one per symbol, common support 0..k_max
    Regime regime = Regime::low_medium;

    [[nodiscard]] std::size_t order() const { return pmfs.size(); }
    [[nodiscard]] std::size_t k_max() const { return pmfs.empty() ? 0 : pmfs.front().k_max(); }
    [[nodiscard]] double p(std::size_t k, std::size_t m) const { return pmfs.at(m)[k]; }
};

inline std::vector<double> per_pixel_rates(const ReceiverConfig& config, const PamConstellation& constellation) {
    std::vector<double> rates;
    rates.reserve(constellation.order());
    for (double level : constellation.levels()) rates.push_back(total_rate(config, level, RateScope::per_pixel));
    return rates;
}

/// Builds the M per-symbol array PMFs for the requested regime. The regime
/// must agree with the configuration's dead-time ratio.
inline SymbolModel build_symbol_model(const ReceiverConfig& config, const PamConstellation& constellation,
                                      Regime regime) {
    config.validate();
    const Regime actual = classify(config);
    if (actual == Regime::unsupported)
        throw DomainError("dead-time ratio " + std::to_string(dead_time_ratio(config)) +
                          " is neither < 1 nor an integer");
    if (regime != actual)
        throw DomainError("requested regime " + std::string(to_string(regime)) + " but configuration is " +
                          std::string(to_string(actual)));

    SymbolModel model{constellation, {}, regime};
    const auto rates = per_pixel_rates(config, constellation);
    if (regime == Regime::low_medium) {
        for (double rate : rates)
            model.pmfs.push_back(pmf_array_low(RenewalParams::from_config(config, rate), config.array_scale));
    } else {
        const MarkovParams chain = MarkovParams::from_constellation(config, constellation);
        for (double rate : rates) model.pmfs.push_back(pmf_array_high(config, rate, chain));
    }
    std::size_t kmax = 0;
    for (const auto& pmf : model.pmfs) kmax = std::max(kmax, pmf.k_max());
    for (auto& pmf : model.pmfs) pmf.pad_to(kmax);
    return model;
}

inline SymbolModel build_symbol_model(const ReceiverConfig& config, const PamConstellation& constellation) {
    return build_symbol_model(config, constellation, classify(config));
}

/// p(k | x_{m+1}) / p(k | x_m) for lower symbol index m (0-based). 0/0 is a
/// tie and returns 1.
inline double likelihood_ratio(const SymbolModel& model, std::size_t m, std::size_t k) {
    if (m + 1 >= model.order()) throw ConfigError("likelihood_ratio: symbol index out of range");
    if (k > model.k_max()) throw ConfigError("likelihood_ratio: count out of range");
    const double num = model.p(k, m + 1);
    const double den = model.p(k, m);
    if (den == 0.0) return num == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return num / den;
}

/// Adjacent-pair SER with likelihood-ratio decision regions, normalized by 1/M.
inline double ser_ml(const SymbolModel& model) {
    CompensatedSum total;
    for (std::size_t m = 0; m + 1 < model.order(); ++m) {
        for (std::size_t k = 0; k <= model.k_max(); ++k) {
            if (likelihood_ratio(model, m, k) <= 1.0)
                total += model.p(k, m + 1);
            else
                total += model.p(k, m);
        }
    }
    return total.value() / static_cast<double>(model.order());
}

struct ThresholdSet {
    std::vector<double> thresholds;     // k_th(x_1) .. k_th(x_{M-1})
    std::vector<double> intermediates;  // per-symbol lambda(x_m) or p_apr(x_m)
    Regime regime = Regime::low_medium;
};

namespace detail {
inline double clamp_threshold(double th, double kmax) { return std::clamp(th, 0.0, kmax); }
}  // namespace detail

/// Closed-form thresholds for xi < 1, treating the array as one SPAD
/// observed for T_s * N_A with the per-pixel rates. Clamped to [0, k_max].
inline ThresholdSet threshold_low(const ReceiverConfig& config, const PamConstellation& constellation) {
    config.validate();
    if (classify(config) != Regime::low_medium) throw DomainError("threshold_low needs dead-time ratio < 1");
    ThresholdSet out;
    out.regime = Regime::low_medium;
    out.intermediates = per_pixel_rates(config, constellation);
    const double span = config.symbol_ns * static_cast<double>(config.array_scale);
    const double kmax = static_cast<double>(max_counts(config));
    for (std::size_t m = 0; m + 1 < out.intermediates.size(); ++m) {
        const double lo = out.intermediates[m], hi = out.intermediates[m + 1];
        if (lo == 0.0 || hi == 0.0) throw DomainError("zero-rate symbol needs nonzero background/dark rate");
        if (hi == lo) throw DomainError("adjacent symbols have equal rates; threshold undefined");
        const double diff = hi - lo;
        const double th = diff * (span - config.dead_time_ns) / (diff * config.dead_time_ns + std::log(hi / lo));
        out.thresholds.push_back(detail::clamp_threshold(th, kmax));
    }
    return out;
}

/// Count where Binomial(n, lo) and Binomial(n, hi) are equally likely.
inline double binomial_threshold(double lo, double hi, double n) {
    if (!(lo > 0.0 && lo < 1.0 && hi > 0.0 && hi < 1.0))
        throw DomainError("equivalent detection probability must lie strictly inside (0, 1)");
    if (hi == lo) throw DomainError("adjacent symbols have equal detection probability; threshold undefined");
    return n * std::log((1.0 - lo) / (1.0 - hi)) / std::log(hi * (1.0 - lo) / (lo * (1.0 - hi)));
}

/// Binomial-approximation thresholds for integer xi >= 1, k_max = N_A.
inline ThresholdSet threshold_high(const ReceiverConfig& config, const PamConstellation& constellation,
                                   const MarkovParams& chain) {
    config.validate();
    if (classify(config) != Regime::high) throw DomainError("threshold_high needs integer dead-time ratio >= 1");
    ThresholdSet out;
    out.regime = Regime::high;
    const double active = active_prob(chain);
    for (double rate : per_pixel_rates(config, constellation))
        out.intermediates.push_back(trigger_prob_blended(rate, config.symbol_ns) * active);
    const double kmax = static_cast<double>(config.array_scale);
    for (std::size_t m = 0; m + 1 < out.intermediates.size(); ++m) {
        const double th = binomial_threshold(out.intermediates[m], out.intermediates[m + 1], kmax);
        out.thresholds.push_back(detail::clamp_threshold(th, kmax));
    }
    return out;
}

/// Regime dispatch for the closed-form thresholds.
inline ThresholdSet closed_form_thresholds(const ReceiverConfig& config, const PamConstellation& constellation) {
    switch (classify(config)) {
    case Regime::low_medium: return threshold_low(config, constellation);
    case Regime::high:
        return threshold_high(config, constellation, MarkovParams::from_constellation(config, constellation));
    case Regime::unsupported: break;
    }
    throw DomainError("dead-time ratio " + std::to_string(dead_time_ratio(config)) + " has no threshold model");
}

/// Largest count assigned to the lower symbol of a pair. An integer
/// threshold belongs to the lower symbol.
inline std::size_t lower_region_end(double threshold) {
    return static_cast<std::size_t>(std::floor(std::max(threshold, 0.0)));
}

/// Adjacent-pair SER under threshold detection, normalized by 1/M.
inline double ser_threshold(const SymbolModel& model, const ThresholdSet& ts) {
    if (ts.thresholds.size() + 1 != model.order()) throw ConfigError("ser_threshold: threshold count mismatch");
    CompensatedSum total;
    for (std::size_t m = 0; m + 1 < model.order(); ++m) {
        const std::size_t last_lower = lower_region_end(ts.thresholds[m]);
        for (std::size_t k = 0; k <= model.k_max(); ++k) total += k <= last_lower ? model.p(k, m + 1) : model.p(k, m);
    }
    return total.value() / static_cast<double>(model.order());
}

/// Symbol decided for each count 0..k_max.
struct DecisionRule {
    std::vector<std::uint16_t> symbol_for_count;

    [[nodiscard]] std::uint16_t decide(std::size_t k) const {
        return k < symbol_for_count.size() ? symbol_for_count[k] : symbol_for_count.back();
    }
};

/// M-ary maximum likelihood over the model PMFs; ties go to the lower symbol.
inline DecisionRule ml_decision_rule(const SymbolModel& model) {
    DecisionRule rule;
    rule.symbol_for_count.resize(model.k_max() + 1);
    for (std::size_t k = 0; k <= model.k_max(); ++k) {
        std::size_t best = 0;
        for (std::size_t m = 1; m < model.order(); ++m)
            if (model.p(k, m) > model.p(k, best)) best = m;
        rule.symbol_for_count[k] = static_cast<std::uint16_t>(best);
    }
    return rule;
}

/// Decide x_m when k falls between thresholds m-1 and m.
inline DecisionRule threshold_decision_rule(const ThresholdSet& ts, std::size_t k_max) {
    DecisionRule rule;
    rule.symbol_for_count.resize(k_max + 1);
    for (std::size_t k = 0; k <= k_max; ++k) {
        std::uint16_t sym = 0;
        for (double th : ts.thresholds)
            if (k > lower_region_end(th)) ++sym;
        rule.symbol_for_count[k] = sym;
    }
    return rule;
}

}  // namespace spadcount
