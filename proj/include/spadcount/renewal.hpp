#pragma once

// Photon-count statistics for dead-time ratios below one (renewal model).
//
// A pixel is a non-paralyzable counter: after each registered count it is
// blind for tau_d. Without inter-symbol interference the pixel starts every
// symbol alive; with ISI it starts blind for a residual time T_ISI drawn from
// the carry-over density of a previous symbol at the same rate. The blend of
// the two is what the array model consumes.

#include "spadcount/core.hpp"

namespace spadcount {

struct RenewalParams {
    double rate = 0.0;  // lambda per pixel, counts/ns
    double symbol_ns = 10.0;
    double dead_time_ns = 1.0;

    static RenewalParams from_config(const ReceiverConfig& config, double pixel_rate) {
        RenewalParams p{pixel_rate, config.symbol_ns, config.dead_time_ns};
        p.validate();
        return p;
    }

    void validate() const {
        if (!(rate >= 0.0) || !std::isfinite(rate)) throw ConfigError("renewal rate must be nonnegative");
        if (!(symbol_ns > 0.0) || !(dead_time_ns > 0.0)) throw ConfigError("renewal timing must be positive");
        if (classify_ratio(dead_time_ns / symbol_ns) != Regime::low_medium)
            throw DomainError("renewal model needs dead_time_ns < symbol_ns");
    }

    /// ceil(T_s / tau_d): the per-pixel count ceiling.
    [[nodiscard]] std::int64_t pixel_max() const { return per_pixel_max_counts(symbol_ns, dead_time_ns); }
};

/// Density of the last arrival time in a symbol, lambda e^{-lambda (T_s - t)}.
inline double last_arrival_pdf(double t, const RenewalParams& p) {
    if (!(t >= 0.0 && t <= p.symbol_ns)) throw ConfigError("last_arrival_pdf: t outside [0, T_s]");
    return p.rate * std::exp(-p.rate * (p.symbol_ns - t));
}

struct ResidualDensity {
    double density = 0.0;       // continuous part at t
    double atom_at_zero = 0.0;  // P{T_ISI = 0}
};

/// Residual dead time carried into the next symbol: density
/// lambda e^{-lambda (tau_d - t)} on (0, tau_d] plus an atom e^{-lambda tau_d} at 0.
inline ResidualDensity isi_residual_pdf(double t, const RenewalParams& p) {
    if (!(t >= 0.0 && t <= p.dead_time_ns)) throw ConfigError("isi_residual_pdf: t outside [0, tau_d]");
    return {p.rate * std::exp(-p.rate * (p.dead_time_ns - t)), std::exp(-p.rate * p.dead_time_ns)};
}

inline constexpr double kNegativeClampTolerance = 1e-9;

namespace detail {

/// (lambda^i / i!) [t - a tau]^i e^{-lambda [t - b tau]}, zero when t - a tau < 0.
inline double shifted_term(const RenewalParams& p, std::int64_t i, double t, std::int64_t a, std::int64_t b) {
    const double x = t - static_cast<double>(a) * p.dead_time_ns;
    if (x < 0.0) return 0.0;
    const double decay = p.rate * (t - static_cast<double>(b) * p.dead_time_ns);
    if (i == 0) return std::exp(-decay);
    const double lx = p.rate * x;
    if (lx == 0.0) return 0.0;
    return std::exp(static_cast<double>(i) * std::log(lx) - log_factorial(static_cast<std::uint64_t>(i)) - decay);
}

inline double halving_weight(std::int64_t j) { return 1.0 - std::ldexp(1.0, -static_cast<int>(j)); }

inline double clamp_probability(double v, std::string_view what) {
    if (v >= 0.0) return v;
    if (v >= -kNegativeClampTolerance) return 0.0;
    throw DomainError(std::string(what) + ": probability " + std::to_string(v) + " below clamp tolerance");
}

inline void check_count(std::int64_t k, const RenewalParams& p) {
    if (k < 0 || k > p.pixel_max()) throw ConfigError("count k outside 0..pixel_max");
}

/// ISI-free count probability over (0, t); pixel_max fixed by T_s.
inline double pmf_no_isi_at(std::int64_t k, double t, const RenewalParams& p) {
    const std::int64_t kmax = p.pixel_max();
    CompensatedSum s;
    if (k < kmax) {
        for (std::int64_t i = 0; i <= k; ++i) s += shifted_term(p, i, t, k, k);
        for (std::int64_t i = 0; i < k; ++i) s -= shifted_term(p, i, t, k - 1, k - 1);
    } else {
        s += 1.0;
        for (std::int64_t i = 0; i < k; ++i) s -= shifted_term(p, i, t, k - 1, k - 1);
    }
    return s.value();
}

/// Closed-form ISI count probability over (0, t), before clamping.
///
/// For k < pixel_max: the no-ISI core plus the two halving-weighted ISI
/// brackets. When (k + 1) tau_d > t the shifted (k + 1) inverse transform
/// is switched off by causality; its constant and growing parts then no
/// longer cancel and contribute 1 - 2^{-(k+1)} e^{-lambda((k+1) tau_d - t)}.
/// This only occurs for k = pixel_max - 1 with non-integer T_s / tau_d.
///
/// For k = pixel_max: e^{-lambda tau_d} times the no-ISI tail, a lower bound
/// (tight when T_s / tau_d is an integer and the rate is low).
inline double pmf_isi_raw_at(std::int64_t k, double t, const RenewalParams& p) {
    const std::int64_t kmax = p.pixel_max();
    CompensatedSum s;
    if (k == kmax) {
        s += std::exp(-p.rate * p.dead_time_ns);
        for (std::int64_t i = 0; i < k; ++i) s -= shifted_term(p, i, t, k - 1, k - 2);
        return s.value();
    }
    for (std::int64_t i = 0; i <= k; ++i) s += shifted_term(p, i, t, k, k - 1);
    for (std::int64_t i = 0; i < k; ++i) s -= shifted_term(p, i, t, k - 1, k - 2);
    for (std::int64_t i = 0; i < k; ++i) {
        const double w = halving_weight(k - i);
        s += w * shifted_term(p, i, t, k - 1, k - 2);
        s -= w * shifted_term(p, i, t, k, k);
    }
    for (std::int64_t i = 0; i <= k; ++i) {
        const double w = halving_weight(k - i + 1);
        s += w * shifted_term(p, i, t, k + 1, k + 1);
        s -= w * shifted_term(p, i, t, k, k - 1);
    }
    const double overshoot = static_cast<double>(k + 1) * p.dead_time_ns - t;
    if (overshoot > 0.0) {
        s += 1.0;
        s -= std::ldexp(std::exp(-p.rate * overshoot), -static_cast<int>(k + 1));
    }
    return s.value();
}

}  // namespace detail

/// P{k counts in one symbol}, pixel alive at the symbol start.
inline double pmf_no_isi_single(std::int64_t k, const RenewalParams& p) {
    p.validate();
    detail::check_count(k, p);
    return detail::clamp_probability(detail::pmf_no_isi_at(k, p.symbol_ns, p), "pmf_no_isi_single");
}

/// P{k counts in one symbol} when the preceding symbol had the same rate and
/// its residual dead time follows the carry-over density.
inline double pmf_isi_single(std::int64_t k, const RenewalParams& p) {
    p.validate();
    detail::check_count(k, p);
    return detail::clamp_probability(detail::pmf_isi_raw_at(k, p.symbol_ns, p), "pmf_isi_single");
}

/// Equal-weight mean of the ISI and ISI-free probabilities.
inline double pmf_blend_single(std::int64_t k, const RenewalParams& p) {
    return 0.5 * (pmf_isi_single(k, p) + pmf_no_isi_single(k, p));
}

namespace detail {

template <class Fn>
CountPmf tabulate(const RenewalParams& p, ModelTag tag, Fn&& fn) {
    CountPmf out;
    out.tag = tag;
    const std::int64_t kmax = p.pixel_max();
    out.probs.reserve(static_cast<std::size_t>(kmax + 1));
    for (std::int64_t k = 0; k <= kmax; ++k) out.probs.push_back(fn(k, p));
    out.deficit = 1.0 - out.total();
    return out;
}

}  // namespace detail

inline CountPmf pmf_no_isi(const RenewalParams& p) {
    return detail::tabulate(p, ModelTag::renewal_no_isi, pmf_no_isi_single);
}

inline CountPmf pmf_isi(const RenewalParams& p) { return detail::tabulate(p, ModelTag::renewal_isi, pmf_isi_single); }

inline CountPmf pmf_blend(const RenewalParams& p) {
    return detail::tabulate(p, ModelTag::renewal_blend, pmf_blend_single);
}

/// Discrete convolution with compensated accumulation.
inline std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) return {};
    std::vector<CompensatedSum> acc(a.size() + b.size() - 1);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) continue;
        for (std::size_t j = 0; j < b.size(); ++j) acc[i + j] += a[i] * b[j];
    }
    std::vector<double> out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = acc[i].value();
    return out;
}

/// Distribution of the sum of n i.i.d. draws from `single`.
inline std::vector<double> convolution_power(std::span<const double> single, std::int64_t n) {
    if (n < 1) throw ConfigError("convolution_power needs n >= 1");
    std::vector<double> out(single.begin(), single.end());
    for (std::int64_t i = 1; i < n; ++i) out = convolve(out, single);
    return out;
}

/// Array PMF: sum of N_A independent pixels, each following the blended
/// single-pixel PMF. Renormalized; the pre-normalization shortfall is kept
/// in `deficit`.
inline CountPmf pmf_array_low(const RenewalParams& p, std::int64_t array_scale) {
    if (array_scale < 1) throw ConfigError("array_scale must be >= 1");
    const CountPmf single = pmf_blend(p);
    CountPmf out;
    out.tag = ModelTag::renewal_array;
    out.probs = convolution_power(single.probs, array_scale);
    const double total = out.total();
    if (!(total > 0.0)) throw DomainError("pmf_array_low: array PMF has no mass");
    out.deficit = 1.0 - total;
    for (double& v : out.probs) v /= total;
    return out;
}

}  // namespace spadcount
