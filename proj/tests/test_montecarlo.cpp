#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <set>

#include "spadcount/montecarlo.hpp"

using namespace spadcount;

namespace {

ReceiverConfig receiver(double pde, std::int64_t na, double tau, double ts, double lb = 0.01, double ld = 1e-5) {
    ReceiverConfig c;
    c.pde = pde;
    c.array_scale = na;
    c.dead_time_ns = tau;
    c.symbol_ns = ts;
    c.background_rate = lb;
    c.dark_rate = ld;
    return c;
}

SimSpec spec_for(const ReceiverConfig& c, PamConstellation cons, SymbolSource src, std::int64_t n, std::uint64_t seed) {
    SimSpec s{c, std::move(cons)};
    s.source = std::move(src);
    s.n_symbols = n;
    s.warmup_symbols = kDefaultWarmupSymbols;
    s.seed = seed;
    return s;
}

double absolute_ns(const SymbolTime& t, double ts) { return static_cast<double>(t.symbol) * ts + t.offset; }

}  // namespace

TEST(Rng, SplitMixReferenceValue) {
    // first output of the reference splitmix64 generator seeded with 0
    EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFULL);
}

TEST(Rng, SubstreamsAreDistinct) {
    std::set<std::uint64_t> seen;
    for (auto kind : {StreamKind::symbols, StreamKind::pixel, StreamKind::sweep_point})
        for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(substream_seed(42, kind, i));
    EXPECT_EQ(seen.size(), 3000U);
    EXPECT_NE(substream_seed(1, StreamKind::pixel, 0), substream_seed(2, StreamKind::pixel, 0));
    EXPECT_EQ(substream_seed(9, StreamKind::pixel, 5), substream_seed(9, StreamKind::pixel, 5));
}

TEST(Rng, DrawRanges) {
    Rng rng(7);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_LT(rng.below(7), 7U);
        sum += rng.exponential();
    }
    EXPECT_NEAR(sum / n, 1.0, 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST(SymbolTime, AdvanceNormalizes) {
    const auto t = advance({3, 1.5}, 7.0, 2.0);
    EXPECT_EQ(t.symbol, 7);
    EXPECT_DOUBLE_EQ(t.offset, 0.5);
    const auto u = advance({0, 0.0}, 2.0, 2.0);
    EXPECT_EQ(u.symbol, 1);
    EXPECT_EQ(u.offset, 0.0);
    EXPECT_TRUE((SymbolTime{1, 0.9} < SymbolTime{2, 0.0}));
    EXPECT_TRUE((SymbolTime{2, 0.1} < SymbolTime{2, 0.2}));
}

TEST(PixelWalk, EventsRespectDeadTime) {
    for (double tau : {0.3, 1.0, 2.5, 4.0, 7.0}) {
        const auto c = receiver(1.0, 1, tau, 2.0);
        std::vector<double> rates(20000);
        Rng gen(11);
        for (auto& r : rates) r = 5.0 * gen.uniform();
        const auto events = simulate_pixel_events(rates, c, 99);
        ASSERT_GT(events.size(), 100U);
        EXPECT_EQ(replay_violation(events, c), events.size());
        for (std::size_t i = 1; i < events.size(); ++i)
            ASSERT_GE(absolute_ns(events[i], 2.0) - absolute_ns(events[i - 1], 2.0), tau - 1e-9) << tau;
        const auto counts = simulate_pixel_symbols(rates, c, 99);
        std::uint64_t total = 0;
        for (auto k : counts) total += k;
        EXPECT_EQ(total, events.size());
    }
}

TEST(PixelWalk, ReplayCatchesTamperedLog) {
    const auto c = receiver(1.0, 1, 1.0, 10.0);
    const std::vector<double> rates(1000, 2.0);
    auto events = simulate_pixel_events(rates, c, 5);
    ASSERT_GT(events.size(), 10U);
    auto bad = events;
    bad[5] = advance(bad[4], 0.5, c.symbol_ns);
    EXPECT_EQ(replay_violation(bad, c), 5U);
    bad = events;
    bad[3].offset = 10.5;
    EXPECT_EQ(replay_violation(bad, c), 3U);
}

TEST(PixelWalk, HighRatioAtMostOnePerSymbol) {
    for (double tau : {2.0, 4.0, 20.0}) {
        const auto c = receiver(1.0, 1, tau, 2.0);
        const std::vector<double> rates(50000, 3.0);
        const auto counts = simulate_pixel_symbols(rates, c, 2);
        const auto xi = static_cast<std::size_t>(tau / 2.0);
        for (std::size_t i = 0; i < counts.size(); ++i) {
            ASSERT_LE(counts[i], 1U);
            if (counts[i] == 1) {
                for (std::size_t j = i + 1; j < std::min(counts.size(), i + xi); ++j) ASSERT_EQ(counts[j], 0U);
            }
        }
    }
}

TEST(PixelWalk, StationaryMeanMatchesRenewalRate) {
    // A non-paralyzable counter at constant rate registers lambda / (1 + lambda tau) per ns.
    const double rate = 1.5, tau = 1.0, ts = 10.0;
    const auto c = receiver(1.0, 1, tau, ts);
    const std::size_t n = 200000, batch = 200;
    const std::vector<double> rates(n + 16, rate);
    const auto counts = simulate_pixel_symbols(rates, c, 31);
    std::vector<double> means;
    for (std::size_t b = 16; b + batch <= counts.size(); b += batch) {
        double s = 0.0;
        for (std::size_t i = b; i < b + batch; ++i) s += counts[i];
        means.push_back(s / batch);
    }
    double mean = 0.0, var = 0.0;
    for (double m : means) mean += m;
    mean /= static_cast<double>(means.size());
    for (double m : means) var += (m - mean) * (m - mean);
    var /= static_cast<double>(means.size() - 1);
    const double se = std::sqrt(var / static_cast<double>(means.size()));
    EXPECT_NEAR(mean, ts * rate / (1.0 + rate * tau), 3.0 * se);
}

TEST(PixelWalk, PoissonWithoutDeadTime) {
    // tau -> 0: counts per symbol are Poisson(lambda T_s); Pearson chi-square
    const double lt = 2.0;
    const auto c = receiver(1.0, 1, 1e-9, 1.0);
    const std::size_t n = 1'000'000;
    const std::vector<double> rates(n, lt);
    const auto counts = simulate_pixel_symbols(rates, c, 2024);
    const std::size_t bins = 9;  // 0..7 and >= 8
    std::vector<double> obs(bins, 0.0), expect(bins, 0.0);
    for (auto k : counts) obs[std::min<std::size_t>(k, bins - 1)] += 1.0;
    double head = 0.0;
    for (std::size_t k = 0; k + 1 < bins; ++k) {
        expect[k] = static_cast<double>(n) * poisson_pmf(k, lt, 1.0);
        head += expect[k];
    }
    expect[bins - 1] = static_cast<double>(n) - head;
    double chi2 = 0.0;
    for (std::size_t k = 0; k < bins; ++k) chi2 += (obs[k] - expect[k]) * (obs[k] - expect[k]) / expect[k];
    const double p = boost::math::gamma_q((bins - 1) / 2.0, chi2 / 2.0);
    EXPECT_GT(p, 0.001) << "chi2=" << chi2;
}

TEST(Array, DeterministicAcrossWorkers) {
    const auto c = receiver(0.5, 13, 1.0, 10.0);
    const auto spec = spec_for(c, PamConstellation({0.2, 2, 8, 20}), UniformSymbols{}, 5000, 77);
    const auto a = simulate_array_symbols(spec, 1);
    const auto b = simulate_array_symbols(spec, 4);
    const auto d = simulate_array_symbols(spec, 13);
    EXPECT_EQ(a.counts, b.counts);
    EXPECT_EQ(a.counts, d.counts);
    EXPECT_EQ(a.symbols, b.symbols);
    std::vector<std::uint32_t> sum(a.counts.size(), 0);
    for (std::int64_t p = 0; p < c.array_scale; ++p) {
        const auto px = simulate_array_pixel(spec, p);
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += px[i];
    }
    EXPECT_EQ(sum, a.counts);
    auto other = spec;
    other.seed = 78;
    EXPECT_NE(simulate_array_symbols(other, 1).counts, a.counts);
}

TEST(Array, CountsBoundedByMaxCounts) {
    for (double tau : {1.0, 2.5, 10.0, 20.0}) {
        const auto c = receiver(0.9, 6, tau, 10.0, 5.0);
        const auto spec = spec_for(c, PamConstellation({10, 100}), UniformSymbols{}, 3000, 1);
        const auto t = simulate_array_symbols(spec);
        for (auto k : t.counts) ASSERT_LE(static_cast<std::int64_t>(k), max_counts(c));
    }
}

TEST(Array, SymbolSources) {
    const auto c = receiver(0.5, 4, 1.0, 10.0);
    const PamConstellation cons({0.2, 2, 8, 20});
    const auto fixed = simulate_array_symbols(spec_for(c, cons, FixedSymbol{2}, 100, 3));
    for (auto s : fixed.symbols) EXPECT_EQ(s, 2);
    const auto seq = simulate_array_symbols(spec_for(c, cons, ExplicitSequence{{3, 0, 1}}, 100, 3));
    for (std::size_t i = 0; i < seq.symbols.size(); ++i) EXPECT_EQ(seq.symbols[i], std::vector<int>({3, 0, 1})[i % 3]);
    const auto uni = simulate_array_symbols(spec_for(c, cons, UniformSymbols{}, 40000, 3));
    std::vector<int> hist(4, 0);
    for (auto s : uni.symbols) ++hist[s];
    for (int h : hist) EXPECT_NEAR(h, 10000, 400);
}

TEST(Array, SpecValidation) {
    const auto c = receiver(0.5, 4, 1.0, 10.0);
    const PamConstellation cons({0.2, 2});
    EXPECT_THROW(spec_for(c, cons, FixedSymbol{2}, 100, 1).validate(), ConfigError);
    EXPECT_THROW(spec_for(c, cons, ExplicitSequence{{}}, 100, 1).validate(), ConfigError);
    EXPECT_THROW(spec_for(c, cons, ExplicitSequence{{0, 5}}, 100, 1).validate(), ConfigError);
    EXPECT_THROW(spec_for(c, cons, UniformSymbols{}, 16, 1).validate(), ConfigError);
    EXPECT_NO_THROW(spec_for(c, cons, UniformSymbols{}, 17, 1).validate());
}

TEST(EmpiricalPmf, NormalizedAndTargetChecked) {
    const auto c = receiver(0.5, 4, 1.0, 10.0);
    const PamConstellation cons({0.2, 2, 8, 20});
    const auto spec = spec_for(c, cons, UniformSymbols{}, 20000, 9);
    const auto pmf = empirical_pmf(spec, 3);
    EXPECT_EQ(pmf.k_max(), static_cast<std::size_t>(max_counts(c)));
    EXPECT_NEAR(pmf.total(), 1.0, 1e-12);
    EXPECT_EQ(pmf.tag, ModelTag::empirical);
    EXPECT_THROW(empirical_pmf(spec_for(c, cons, FixedSymbol{1}, 100, 9), 0), DomainError);
}

TEST(EmpiricalPmf, SymbolHistoryMatters) {
    // xi = 0.25: carried-over dead time makes the random-history PMF differ
    // from the identical-symbol PMF.
    const auto c = receiver(0.5, 4, 2.5, 10.0);
    const PamConstellation cons({0.2, 2, 8, 20});
    const auto uniform = empirical_pmf(spec_for(c, cons, UniformSymbols{}, 200000, 4), 1);
    const auto fixed = empirical_pmf(spec_for(c, cons, FixedSymbol{1}, 50000, 4), 1);
    EXPECT_GT(total_variation(uniform, fixed), 0.01);
}

TEST(EmpiricalPmf, CountsDepressedAfterBrightSymbol) {
    const auto c = receiver(0.5, 4, 2.5, 10.0);
    const PamConstellation cons({0.2, 2, 8, 20});
    // symbol 1 follows the brightest symbol at even positions, the dimmest at odd ones
    const auto t = simulate_array_symbols(spec_for(c, cons, ExplicitSequence{{3, 1, 0, 1}}, 400000, 8));
    double after_bright = 0.0, after_dim = 0.0;
    std::size_t nb = 0, nd = 0;
    for (std::size_t i = 16; i < t.symbols.size(); ++i) {
        if (t.symbols[i] != 1) continue;
        if (t.symbols[i - 1] == 3) {
            after_bright += t.counts[i];
            ++nb;
        } else {
            after_dim += t.counts[i];
            ++nd;
        }
    }
    EXPECT_LT(after_bright / static_cast<double>(nb), 0.95 * after_dim / static_cast<double>(nd));
}

TEST(Wilson, KnownValues) {
    const auto zero = wilson_interval(0, 10);
    EXPECT_EQ(zero.estimate, 0.0);
    EXPECT_EQ(zero.lower, 0.0);
    EXPECT_NEAR(zero.upper, kZ95 * kZ95 / (10.0 + kZ95 * kZ95), 1e-12);
    const auto half = wilson_interval(50, 100);
    EXPECT_NEAR(half.lower + half.upper, 1.0, 1e-12);
    EXPECT_NEAR(half.upper - half.lower, 2.0 * 0.0961, 2e-3);
    const auto none = wilson_interval(0, 0);
    EXPECT_EQ(none.trials, 0U);
    EXPECT_EQ(none.upper, 1.0);
}

TEST(EmpiricalSer, CountsMismatches) {
    SimTrace t;
    t.symbols = {0, 1, 1, 0, 1};
    t.counts = {0, 5, 0, 9, 7};
    t.warmup_symbols = 1;
    DecisionRule rule{{0, 0, 1}};  // k >= 2 decided as symbol 1
    const auto e = empirical_ser(t, rule);
    EXPECT_EQ(e.trials, 4U);
    EXPECT_EQ(e.successes, 2U);
    EXPECT_DOUBLE_EQ(e.estimate, 0.5);
}

TEST(EmpiricalSer, NeedsUniformSource) {
    const auto c = receiver(0.5, 4, 1.0, 10.0);
    const auto spec = spec_for(c, PamConstellation({0.2, 2}), FixedSymbol{0}, 100, 1);
    EXPECT_THROW(empirical_ser(spec, DecisionRule{{0, 1}}), ConfigError);
}

TEST(EmpiricalSer, IndistinguishableSymbolsGiveOneHalf) {
    const auto c = receiver(0.5, 4, 1.0, 10.0);
    const auto spec = spec_for(c, PamConstellation::with_ties({3.0, 3.0}), UniformSymbols{}, 100000, 12);
    const auto k_max = static_cast<std::size_t>(max_counts(c));
    DecisionRule rule;
    rule.symbol_for_count.assign(k_max + 1, 0);
    for (std::size_t k = 20; k <= k_max; ++k) rule.symbol_for_count[k] = 1;
    const auto e = empirical_ser(spec, rule);
    EXPECT_LE(e.lower, 0.5);
    EXPECT_GE(e.upper, 0.5);
}
