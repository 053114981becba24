#pragma once

// Shared receiver types, rate composition and Poisson baseline statistics.
// Units: time in nanoseconds, rates in counts per nanosecond.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spadcount {

/// Invalid configuration or input (bad field values, malformed files).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input is well-formed but outside the model's domain (degenerate
/// constellation, unsupported dead-time ratio, non-physical probabilities).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    CompensatedSum& operator+=(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
        return *this;
    }
    CompensatedSum& operator-=(double x) { return *this += -x; }
    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
    CompensatedSum s;
    for (double x : xs) s += x;
    return s.value();
}

inline double log_factorial(std::uint64_t n) { return std::lgamma(static_cast<double>(n) + 1.0); }

inline double log_binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return -INFINITY;
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

// Ratios such as 1.1/0.1 evaluate to 11.000000000000002; integer-valued
// timing ratios are snapped before ceil() or integrality checks.
inline constexpr double kRatioSnapTolerance = 1e-9;

inline double snap_ratio(double ratio) {
    const double r = std::round(ratio);
    return std::abs(ratio - r) <= kRatioSnapTolerance * std::max(1.0, std::abs(ratio)) ? r : ratio;
}

inline bool is_integral_ratio(double ratio) { return snap_ratio(ratio) == std::round(ratio); }

/// ceil(symbol/dead), robust to representation error in integer ratios.
inline std::int64_t per_pixel_max_counts(double symbol_ns, double dead_time_ns) {
    return static_cast<std::int64_t>(std::ceil(snap_ratio(symbol_ns / dead_time_ns)));
}

struct ReceiverConfig {
    double pde = 1.0;
    std::int64_t array_scale = 1;
    double dead_time_ns = 1.0;
    double symbol_ns = 10.0;
    double background_rate = 0.0;  // counts/ns incident on the array
    double dark_rate = 0.0;        // counts/ns per pixel

    void validate() const {
        if (!(pde > 0.0 && pde <= 1.0)) throw ConfigError("pde must lie in (0, 1]");
        if (array_scale < 1) throw ConfigError("array_scale must be >= 1");
        if (!(dead_time_ns > 0.0) || !std::isfinite(dead_time_ns))
            throw ConfigError("dead_time_ns must be positive and finite");
        if (!(symbol_ns > 0.0) || !std::isfinite(symbol_ns))
            throw ConfigError("symbol_ns must be positive and finite");
        if (!(background_rate >= 0.0) || !std::isfinite(background_rate))
            throw ConfigError("background_rate must be nonnegative");
        if (!(dark_rate >= 0.0) || !std::isfinite(dark_rate))
            throw ConfigError("dark_rate must be nonnegative");
    }
};

/// Ordered M-PAM signal photon rates (counts/ns).
class PamConstellation {
public:
    explicit PamConstellation(std::vector<double> levels) : levels_(std::move(levels)) {
        check(/*allow_ties=*/false);
    }

    /// Levels = peak * fractions, e.g. the unequally spaced {0, 0.1, 0.4, 1} profile.
    static PamConstellation from_profile(double peak_rate, std::span<const double> fractions) {
        if (!(peak_rate >= 0.0)) throw ConfigError("peak signal rate must be nonnegative");
        std::vector<double> levels;
        levels.reserve(fractions.size());
        for (double f : fractions) levels.push_back(peak_rate * f);
        return PamConstellation(std::move(levels));
    }

    /// Accepts equal adjacent levels. Only meaningful for probing degenerate
    /// detectors; real constellations use the checked constructor.
    static PamConstellation with_ties(std::vector<double> levels) {
        PamConstellation c;
        c.levels_ = std::move(levels);
        c.check(/*allow_ties=*/true);
        return c;
    }

    [[nodiscard]] std::size_t order() const { return levels_.size(); }
    [[nodiscard]] std::span<const double> levels() const { return levels_; }
    [[nodiscard]] double operator[](std::size_t m) const { return levels_.at(m); }

private:
    PamConstellation() = default;

    void check(bool allow_ties) const {
        if (levels_.size() < 2) throw ConfigError("constellation needs at least two levels");
        if (!(levels_.front() >= 0.0)) throw ConfigError("constellation levels must be nonnegative");
        for (std::size_t i = 1; i < levels_.size(); ++i) {
            if (!std::isfinite(levels_[i])) throw ConfigError("constellation levels must be finite");
            const bool ordered = allow_ties ? levels_[i] >= levels_[i - 1] : levels_[i] > levels_[i - 1];
            if (!ordered) throw DomainError("constellation levels must be strictly increasing");
        }
    }

    std::vector<double> levels_;
};

enum class ModelTag { renewal_no_isi, renewal_isi, renewal_blend, renewal_array, markov_array, empirical };

inline std::string_view to_string(ModelTag tag) {
    switch (tag) {
    case ModelTag::renewal_no_isi: return "renewal_no_isi";
    case ModelTag::renewal_isi: return "renewal_isi";
    case ModelTag::renewal_blend: return "renewal_blend";
    case ModelTag::renewal_array: return "renewal_array";
    case ModelTag::markov_array: return "markov_array";
    case ModelTag::empirical: return "empirical";
    }
    return "unknown";
}

/// Distribution over photon counts 0..k_max.
struct CountPmf {
    std::vector<double> probs;
    ModelTag tag = ModelTag::empirical;
    // 1 - (sum before renormalization); zero for exact models.
    double deficit = 0.0;

    [[nodiscard]] std::size_t k_max() const { return probs.empty() ? 0 : probs.size() - 1; }
    [[nodiscard]] double operator[](std::size_t k) const { return k < probs.size() ? probs[k] : 0.0; }
    [[nodiscard]] double total() const { return compensated_sum(probs); }

    [[nodiscard]] double mean() const {
        CompensatedSum s;
        for (std::size_t k = 0; k < probs.size(); ++k) s += static_cast<double>(k) * probs[k];
        return s.value();
    }

    [[nodiscard]] double variance() const {
        const double mu = mean();
        CompensatedSum s;
        for (std::size_t k = 0; k < probs.size(); ++k) {
            const double d = static_cast<double>(k) - mu;
            s += d * d * probs[k];
        }
        return s.value();
    }

    /// Zero-pad up to the requested k_max.
    void pad_to(std::size_t k_max) {
        if (probs.size() < k_max + 1) probs.resize(k_max + 1, 0.0);
    }
};

/// Total variation distance, 0.5 * sum |p - q| over the union of supports.
inline double total_variation(const CountPmf& p, const CountPmf& q) {
    const std::size_t n = std::max(p.probs.size(), q.probs.size());
    CompensatedSum s;
    for (std::size_t k = 0; k < n; ++k) s += std::abs(p[k] - q[k]);
    return 0.5 * s.value();
}

enum class RateScope { array, per_pixel };

/// Detected carrier rate. `array`: p_d(ls + lb) + ld. `per_pixel`: optical
/// flux split over N_A pixels, dark rate stays per pixel.
inline double total_rate(const ReceiverConfig& config, double signal_rate, RateScope scope) {
    if (!(signal_rate >= 0.0)) throw ConfigError("signal rate must be nonnegative");
    if (!(config.background_rate >= 0.0) || !(config.dark_rate >= 0.0))
        throw ConfigError("background and dark rates must be nonnegative");
    const double optical = config.pde * (signal_rate + config.background_rate);
    if (scope == RateScope::per_pixel) return optical / static_cast<double>(config.array_scale) + config.dark_rate;
    return optical + config.dark_rate;
}

/// (rate*duration)^k e^{-rate*duration} / k!
inline double poisson_pmf(std::uint64_t k, double rate, double duration) {
    if (!(rate >= 0.0) || !(duration >= 0.0)) throw ConfigError("poisson_pmf needs nonnegative rate and duration");
    const double mu = rate * duration;
    if (mu == 0.0) return k == 0 ? 1.0 : 0.0;
    if (mu > 30.0 || k > 30) {
        const double kd = static_cast<double>(k);
        return std::exp(kd * std::log(mu) - mu - log_factorial(k));
    }
    double term = std::exp(-mu);
    for (std::uint64_t i = 1; i <= k; ++i) term *= mu / static_cast<double>(i);
    return term;
}

/// Exponential waiting time to the first detection.
inline double first_arrival_pdf(double t, double rate) {
    if (!(rate > 0.0)) throw DomainError("first_arrival_pdf needs a positive rate");
    if (!(t >= 0.0)) throw ConfigError("first_arrival_pdf needs t >= 0");
    return rate * std::exp(-rate * t);
}

/// N_A * ceil(T_s / tau_d).
inline std::int64_t max_counts(const ReceiverConfig& config) {
    config.validate();
    return config.array_scale * per_pixel_max_counts(config.symbol_ns, config.dead_time_ns);
}

inline double dead_time_ratio(const ReceiverConfig& config) {
    config.validate();
    return config.dead_time_ns / config.symbol_ns;
}

enum class Regime { low_medium, high, unsupported };

inline std::string_view to_string(Regime r) {
    switch (r) {
    case Regime::low_medium: return "low_medium";
    case Regime::high: return "high";
    case Regime::unsupported: return "unsupported";
    }
    return "unknown";
}

/// xi < 1 -> renewal model; integer xi >= 1 -> Markov model; anything else
/// has no model.
inline Regime classify_ratio(double xi) {
    const double snapped = snap_ratio(xi);
    if (snapped < 1.0) return Regime::low_medium;
    if (snapped == std::round(snapped)) return Regime::high;
    return Regime::unsupported;
}

inline Regime classify(const ReceiverConfig& config) { return classify_ratio(dead_time_ratio(config)); }

/// Integer xi for the high-speed regime.
inline std::int64_t integer_dead_time_ratio(const ReceiverConfig& config) {
    const double xi = dead_time_ratio(config);
    if (classify_ratio(xi) != Regime::high)
        throw DomainError("dead-time ratio " + std::to_string(xi) + " is not an integer >= 1");
    return static_cast<std::int64_t>(std::llround(xi));
}

}  // namespace spadcount
