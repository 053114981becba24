#pragma once

// High-speed model for integer dead-time ratios xi >= 1: each pixel registers
// at most one count per symbol and stays blind for xi symbols afterwards.

#include <Eigen/Dense>

#include "spadcount/core.hpp"

namespace spadcount {

inline constexpr std::size_t kDefaultGridPoints = 4096;

/// A density on a uniform grid over [0, T_s] plus an exact atom at t = 0.
class DensityWithAtom {
public:
    DensityWithAtom(double symbol_ns, std::vector<double> density, double atom)
        : symbol_ns_(symbol_ns), density_(std::move(density)), atom_(atom) {
        if (density_.size() < 2) throw ConfigError("DensityWithAtom needs at least two grid points");
        if (!(symbol_ns_ > 0.0)) throw ConfigError("DensityWithAtom needs a positive span");
    }

    [[nodiscard]] double symbol_ns() const { return symbol_ns_; }
    [[nodiscard]] std::size_t points() const { return density_.size(); }
    [[nodiscard]] double step() const { return symbol_ns_ / static_cast<double>(density_.size() - 1); }
    [[nodiscard]] double time(std::size_t i) const { return step() * static_cast<double>(i); }
    [[nodiscard]] std::span<const double> density() const { return density_; }
    [[nodiscard]] double atom_at_zero() const { return atom_; }

    [[nodiscard]] double integral() const {
        CompensatedSum s;
        for (std::size_t i = 0; i + 1 < density_.size(); ++i) s += 0.5 * (density_[i] + density_[i + 1]);
        return s.value() * step();
    }
    [[nodiscard]] double mass() const { return integral() + atom_; }

    [[nodiscard]] bool same_grid(const DensityWithAtom& other) const {
        return points() == other.points() && symbol_ns_ == other.symbol_ns_;
    }

private:
    double symbol_ns_;
    std::vector<double> density_;
    double atom_;
};

/// Atom mass plus trapezoidal L1 distance between the continuous parts.
inline double l1_distance(const DensityWithAtom& a, const DensityWithAtom& b) {
    if (!a.same_grid(b)) throw ConfigError("l1_distance: grid mismatch");
    CompensatedSum s;
    auto da = a.density();
    auto db = b.density();
    for (std::size_t i = 0; i + 1 < da.size(); ++i)
        s += 0.5 * (std::abs(da[i] - db[i]) + std::abs(da[i + 1] - db[i + 1]));
    return s.value() * a.step() + std::abs(a.atom_at_zero() - b.atom_at_zero());
}

namespace detail {
inline void check_rate(double rate, double symbol_ns) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw ConfigError("rate must be nonnegative");
    if (!(symbol_ns > 0.0)) throw ConfigError("symbol_ns must be positive");
}
}  // namespace detail

/// Residual dead time after the first symbol: lambda e^{-lambda t} plus atom e^{-lambda T_s}.
inline DensityWithAtom isi_pdf_first(double rate, double symbol_ns, std::size_t points = kDefaultGridPoints) {
    detail::check_rate(rate, symbol_ns);
    std::vector<double> f(points);
    const double h = symbol_ns / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) f[i] = rate * std::exp(-rate * h * static_cast<double>(i));
    return {symbol_ns, std::move(f), std::exp(-rate * symbol_ns)};
}

/// One symbol of residual dead-time propagation, discretized by the
/// trapezoid rule on the shared grid.
///
/// density'(t) = int_0^t lambda e^{-lambda (t - u)} f(u) du + atom lambda e^{-lambda t}
/// atom'       = int_0^T e^{-lambda (T - u)} f(u) du + atom e^{-lambda T}
inline DensityWithAtom isi_pdf_iterate(const DensityWithAtom& prev, double rate) {
    detail::check_rate(rate, prev.symbol_ns());
    const auto f = prev.density();
    const std::size_t n = f.size();
    const double h = prev.step();
    const double decay = std::exp(-rate * h);
    std::vector<double> next(n);
    // running = trapezoid of e^{-lambda (t_i - u)} f(u) over [0, t_i]
    double running = 0.0;
    next[0] = prev.atom_at_zero() * rate;
    for (std::size_t i = 1; i < n; ++i) {
        running = decay * running + 0.5 * h * (decay * f[i - 1] + f[i]);
        next[i] = rate * running + prev.atom_at_zero() * rate * std::exp(-rate * prev.time(i));
    }
    // At t = T the same integral with kernel e^{-lambda (T - u)} gives the escape mass.
    const double atom = running + prev.atom_at_zero() * std::exp(-rate * prev.symbol_ns());
    return {prev.symbol_ns(), std::move(next), atom};
}

namespace detail {

struct SteadyTerms {
    double density_factor;  // density / (lambda e^{-lambda t})
    double atom;
};

// Sixth iterate of the propagation, obtained by exact symbolic integration
// of five steps from the first-symbol density. x = lambda t, y = lambda T.
inline double steady_density_factor(double x, double y) {
    const double e1 = std::exp(-y), e2 = e1 * e1, e3 = e2 * e1, e4 = e3 * e1, e5 = e4 * e1;
    const double x2 = x * x, x3 = x2 * x, x4 = x3 * x, x5 = x4 * x;
    const double y2 = y * y, y3 = y2 * y, y4 = y3 * y;
    return x5 / 120.0 + e1 * (y4 / 24.0 + y3 * x / 6.0 + y2 * x2 / 4.0 + y * x3 / 6.0 + x4 / 24.0) +
           e2 * (4.0 * y3 / 3.0 + 2.0 * y2 * x + y * x2 + x3 / 6.0) + e3 * (4.5 * y2 + 3.0 * y * x + 0.5 * x2) +
           e4 * (4.0 * y + x) + e5;
}

inline double steady_atom(double y) {
    const double e1 = std::exp(-y), e2 = e1 * e1, e3 = e2 * e1, e4 = e3 * e1, e5 = e4 * e1, e6 = e5 * e1;
    const double y2 = y * y, y3 = y2 * y, y4 = y3 * y, y5 = y4 * y;
    return y5 / 120.0 * e1 + 2.0 * y4 / 3.0 * e2 + 4.5 * y3 * e3 + 8.0 * y2 * e4 + 5.0 * y * e5 + e6;
}

}  // namespace detail

/// Steady-state residual dead-time density, represented by the sixth symbol.
inline DensityWithAtom isi_pdf_steady_closed(double rate, double symbol_ns,
                                             std::size_t points = kDefaultGridPoints) {
    detail::check_rate(rate, symbol_ns);
    const double y = rate * symbol_ns;
    const double h = symbol_ns / static_cast<double>(points - 1);
    std::vector<double> f(points);
    for (std::size_t i = 0; i < points; ++i) {
        const double x = rate * h * static_cast<double>(i);
        f[i] = rate * std::exp(-x) * detail::steady_density_factor(x, y);
    }
    return {symbol_ns, std::move(f), detail::steady_atom(y)};
}

/// 1 - e^{-lambda T_s}
inline double trigger_prob_no_isi(double rate, double symbol_ns) {
    detail::check_rate(rate, symbol_ns);
    return -std::expm1(-rate * symbol_ns);
}

/// P{T_ISI > 0} under the steady-state residual density.
inline double trigger_prob_isi(double rate, double symbol_ns) {
    detail::check_rate(rate, symbol_ns);
    return 1.0 - detail::steady_atom(rate * symbol_ns);
}

inline double trigger_prob_blended(double rate, double symbol_ns) {
    return 0.5 * (trigger_prob_isi(rate, symbol_ns) + trigger_prob_no_isi(rate, symbol_ns));
}

struct TriggerAverages {
    double p1_tilde = 0.0;  // constellation mean of the blended trigger probability
    double p1 = 0.0;        // constellation mean of the ISI-free trigger probability
};

/// Equal-prior averages over the constellation at per-pixel rates.
inline TriggerAverages constellation_trigger_averages(const PamConstellation& constellation,
                                                      const ReceiverConfig& config) {
    config.validate();
    CompensatedSum tilde, plain;
    for (double level : constellation.levels()) {
        const double rate = total_rate(config, level, RateScope::per_pixel);
        tilde += trigger_prob_blended(rate, config.symbol_ns);
        plain += trigger_prob_no_isi(rate, config.symbol_ns);
    }
    const double m = static_cast<double>(constellation.order());
    return {tilde.value() / m, plain.value() / m};
}

struct MarkovParams {
    double rate = 0.0;  // per-pixel lambda of the symbol under evaluation
    double symbol_ns = 1.0;
    std::int64_t xi = 1;
    double p1_tilde = 0.0, p0_tilde = 1.0;
    double p1 = 0.0, p0 = 1.0;

    static MarkovParams from_probabilities(std::int64_t xi, double p1_tilde, double p1) {
        MarkovParams m;
        m.xi = xi;
        m.p1_tilde = p1_tilde;
        m.p0_tilde = 1.0 - p1_tilde;
        m.p1 = p1;
        m.p0 = 1.0 - p1;
        m.validate();
        return m;
    }

    static MarkovParams from_constellation(const ReceiverConfig& config, const PamConstellation& constellation) {
        const TriggerAverages avg = constellation_trigger_averages(constellation, config);
        MarkovParams m = from_probabilities(integer_dead_time_ratio(config), avg.p1_tilde, avg.p1);
        m.symbol_ns = config.symbol_ns;
        return m;
    }

    void validate() const {
        if (xi < 1) throw DomainError("Markov model needs integer xi >= 1");
        auto prob = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!prob(p1_tilde) || !prob(p0_tilde) || !prob(p1) || !prob(p0))
            throw DomainError("trigger probabilities must lie in [0, 1]");
        if (std::abs(p1_tilde + p0_tilde - 1.0) > 1e-12 || std::abs(p1 + p0 - 1.0) > 1e-12)
            throw DomainError("trigger probabilities must be complementary");
    }
};

/// (xi+1)x(xi+1) row-stochastic transition matrix over group states:
/// rows/columns 0..xi-1 = detection in slot n of the group, xi = no detection.
inline Eigen::MatrixXd transition_matrix(const MarkovParams& m) {
    m.validate();
    const auto n = static_cast<Eigen::Index>(m.xi);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n + 1, n + 1);
    for (Eigen::Index r = 0; r < n; ++r) {
        p(r, r) = m.p1_tilde;
        for (Eigen::Index c = r + 1; c < n; ++c)
            p(r, c) = m.p0_tilde * m.p1 * std::pow(m.p0, static_cast<double>(c - r - 1));
        p(r, n) = m.p0_tilde * std::pow(m.p0, static_cast<double>(n - 1 - r));
    }
    for (Eigen::Index c = 0; c < n; ++c) p(n, c) = m.p1 * std::pow(m.p0, static_cast<double>(c));
    p(n, n) = std::pow(m.p0, static_cast<double>(n));
    return p;
}

/// Stationarity system as A gamma = b: the balance equations (P^T - I)
/// stacked on the normalization row, (xi+2) x (xi+1).
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> stationarity_system(const MarkovParams& m) {
    const Eigen::MatrixXd p = transition_matrix(m);
    const Eigen::Index n = p.rows();
    Eigen::MatrixXd a(n + 1, n);
    a.topRows(n) = p.transpose() - Eigen::MatrixXd::Identity(n, n);
    a.row(n).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
    b(n) = 1.0;
    return {a, b};
}

struct SteadyState {
    std::vector<double> gamma;  // slot-detection probabilities, then no-detection
    double active_prob = 0.0;
};

namespace detail {
inline double steady_denominator(const MarkovParams& m) {
    m.validate();
    const double d = static_cast<double>(m.xi) * m.p1 + m.p0_tilde;
    if (!(d > 0.0)) throw DomainError("degenerate trigger probabilities: p1 = p0_tilde = 0");
    return d;
}
}  // namespace detail

/// Probability that an arbitrary symbol finds the pixel active.
inline double active_prob(const MarkovParams& m) {
    const double d = detail::steady_denominator(m);
    const double xi = static_cast<double>(m.xi);
    const double num = xi * (xi + 3.0) * m.p1 * m.p1 + (3.0 * xi + 5.0) * m.p1 * m.p0_tilde +
                       4.0 * m.p0_tilde * m.p0_tilde;
    return num / (4.0 * d * d);
}

inline SteadyState steady_state_closed(const MarkovParams& m) {
    const double d = detail::steady_denominator(m);
    SteadyState s;
    s.gamma.assign(static_cast<std::size_t>(m.xi), m.p1 / d);
    s.gamma.push_back(m.p0_tilde / d);
    s.active_prob = active_prob(m);
    return s;
}

/// Array PMF at xi >= 1: Binomial(N_A, p_trigger * p_active), where
/// p_trigger is the blended trigger probability at `symbol_rate` and
/// p_active comes from the constellation-averaged chain in `m`.
inline CountPmf pmf_array_high(const ReceiverConfig& config, double symbol_rate, const MarkovParams& m) {
    config.validate();
    if (classify(config) != Regime::high) throw DomainError("pmf_array_high needs integer xi >= 1");
    const double trigger = trigger_prob_blended(symbol_rate, config.symbol_ns);
    const double q = trigger * active_prob(m);
    const auto n = static_cast<std::uint64_t>(config.array_scale);
    CountPmf out;
    out.tag = ModelTag::markov_array;
    out.probs.resize(n + 1, 0.0);
    if (q <= 0.0) {
        out.probs[0] = 1.0;
        return out;
    }
    if (q >= 1.0) {
        out.probs[n] = 1.0;
        return out;
    }
    const double lq = std::log(q), lnq = std::log1p(-q);
    for (std::uint64_t k = 0; k <= n; ++k)
        out.probs[k] = std::exp(log_binomial(n, k) + static_cast<double>(k) * lq + static_cast<double>(n - k) * lnq);
    return out;
}

}  // namespace spadcount
