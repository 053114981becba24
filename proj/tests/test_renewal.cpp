#include <gtest/gtest.h>

#include "spadcount/montecarlo.hpp"
#include "spadcount/renewal.hpp"

using namespace spadcount;

namespace {

double sum_of(const CountPmf& p) {
    CompensatedSum s;
    for (double v : p.probs) s += v;
    return s.value();
}

// Brute-force sum of n i.i.d. pixels by walking every n-tuple of per-pixel counts.
std::vector<double> enumerate_sum(const std::vector<double>& single, int n) {
    const int m = static_cast<int>(single.size());
    std::vector<double> out(static_cast<std::size_t>(n * (m - 1) + 1), 0.0);
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    while (true) {
        double prob = 1.0;
        int total = 0;
        for (int v : idx) {
            prob *= single[static_cast<std::size_t>(v)];
            total += v;
        }
        out[static_cast<std::size_t>(total)] += prob;
        int pos = 0;
        while (pos < n && ++idx[static_cast<std::size_t>(pos)] == m) idx[static_cast<std::size_t>(pos++)] = 0;
        if (pos == n) break;
    }
    return out;
}

}  // namespace

TEST(RenewalParams, Validation) {
    EXPECT_NO_THROW((RenewalParams{1.0, 10.0, 1.0}.validate()));
    EXPECT_THROW((RenewalParams{-1.0, 10.0, 1.0}.validate()), ConfigError);
    EXPECT_THROW((RenewalParams{1.0, 10.0, 10.0}.validate()), DomainError);
    EXPECT_THROW((RenewalParams{1.0, 10.0, 20.0}.validate()), DomainError);
    EXPECT_EQ((RenewalParams{1.0, 10.0, 3.0}.pixel_max()), 4);
    EXPECT_EQ((RenewalParams{1.0, 10.0, 2.5}.pixel_max()), 4);
}

TEST(Densities, ResidualHasUnitMass) {
    const RenewalParams p{1.7, 10.0, 2.0};
    const int n = 20000;
    const double h = p.dead_time_ns / n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += isi_residual_pdf((i + 0.5) * h, p).density * h;
    EXPECT_NEAR(s + isi_residual_pdf(0.0, p).atom_at_zero, 1.0, 1e-8);
    EXPECT_DOUBLE_EQ(last_arrival_pdf(p.symbol_ns, p), p.rate);
    EXPECT_THROW(last_arrival_pdf(11.0, p), ConfigError);
    EXPECT_THROW(isi_residual_pdf(2.5, p), ConfigError);
}

TEST(NoIsi, PoissonLimit) {
    // dead time far below every scale: counts are Poisson(lambda T_s)
    const RenewalParams p{2.0, 1.0, 1e-13};
    for (std::int64_t k = 0; k <= 10; ++k)
        EXPECT_NEAR(pmf_no_isi_single(k, p), poisson_pmf(static_cast<std::uint64_t>(k), 2.0, 1.0), 1e-12) << k;
}

TEST(NoIsi, ZeroRateIsPointMass) {
    const auto pmf = pmf_no_isi({0.0, 10.0, 1.0});
    EXPECT_EQ(pmf.probs[0], 1.0);
    for (std::size_t k = 1; k < pmf.probs.size(); ++k) EXPECT_EQ(pmf.probs[k], 0.0);
}

TEST(NoIsi, NormalizedAndNonnegative) {
    for (double rate : {0.01, 0.3, 1.0, 2.0, 5.0, 20.0})
        for (double tau : {0.5, 1.0, 2.5, 3.0, 7.0}) {
            const auto pmf = pmf_no_isi({rate, 10.0, tau});
            EXPECT_NEAR(sum_of(pmf), 1.0, 1e-9) << rate << ' ' << tau;
            for (double v : pmf.probs) EXPECT_GE(v, 0.0);
        }
}

TEST(NoIsi, SaturatesAtPixelMax) {
    const RenewalParams p{200.0, 10.0, 1.0};
    EXPECT_GT(pmf_no_isi_single(p.pixel_max(), p), 0.99);
}

TEST(NoIsi, MatchesResetSimulation) {
    // A zero-rate spacer symbol after every live symbol guarantees the pixel
    // starts alive, which is the no-ISI condition.
    ReceiverConfig c;
    c.pde = 1.0;
    c.array_scale = 1;
    c.dead_time_ns = 1.0;
    c.symbol_ns = 10.0;
    const std::size_t n = 10'000'000;
    std::vector<double> rates(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) rates[2 * i] = 2.0;
    const auto counts = simulate_pixel_symbols(rates, c, 777);
    const RenewalParams p{2.0, 10.0, 1.0};
    const auto analytic = pmf_no_isi(p);
    CountPmf emp;
    emp.probs.assign(analytic.probs.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) emp.probs.at(counts[2 * i]) += 1.0 / static_cast<double>(n);
    EXPECT_LE(total_variation(analytic, emp), 0.003);
}

TEST(Isi, ApproachesNoIsiForTinyDeadTime) {
    const RenewalParams p{2.0, 1.0, 1e-4};
    for (std::int64_t k = 0; k <= 30; ++k) EXPECT_NEAR(pmf_isi_single(k, p), pmf_no_isi_single(k, p), 1e-6) << k;
}

TEST(Isi, SumsNearOneAtModerateLoad) {
    for (double rate : {0.01, 0.1, 1.0, 5.0}) {
        const auto pmf = pmf_isi({rate, 10.0, 1.0});
        EXPECT_NEAR(sum_of(pmf), 1.0, 1e-3) << rate;
        EXPECT_NEAR(pmf.deficit, 1.0 - sum_of(pmf), 1e-15);
        for (double v : pmf.probs) EXPECT_GE(v, 0.0);
    }
}

TEST(Isi, NonIntegerRatioStaysFiniteAndNonnegative) {
    for (double tau : {2.5, 3.0, 7.0}) {
        const auto pmf = pmf_isi({1.0, 10.0, tau});
        for (double v : pmf.probs) {
            EXPECT_TRUE(std::isfinite(v));
            EXPECT_GE(v, 0.0);
        }
        EXPECT_NEAR(sum_of(pmf), 1.0, 0.05) << tau;
    }
}

TEST(Isi, DepressesCountsVersusNoIsi) {
    const RenewalParams p{1.0, 10.0, 1.0};
    EXPECT_LT(pmf_isi(p).mean(), pmf_no_isi(p).mean());
}

TEST(Blend, IsEqualWeightMean) {
    const RenewalParams p{1.3, 10.0, 1.0};
    const auto a = pmf_isi(p), b = pmf_no_isi(p), c = pmf_blend(p);
    for (std::size_t k = 0; k < c.probs.size(); ++k) EXPECT_DOUBLE_EQ(c.probs[k], 0.5 * (a.probs[k] + b.probs[k]));
    EXPECT_EQ(c.tag, ModelTag::renewal_blend);
}

TEST(Convolution, Basics) {
    const std::vector<double> a{0.5, 0.5};
    const auto two = convolve(a, a);
    ASSERT_EQ(two.size(), 3U);
    EXPECT_DOUBLE_EQ(two[1], 0.5);
    EXPECT_TRUE(convolve({}, a).empty());
    EXPECT_THROW(convolution_power(a, 0), ConfigError);
    const auto ten = convolution_power(a, 10);
    EXPECT_NEAR(ten[5], 252.0 / 1024.0, 1e-15);
}

TEST(Convolution, MatchesMultinomialEnumeration) {
    // single-pixel PMFs with pixel_max <= 3 from the renewal model and a fixed table
    std::vector<std::vector<double>> singles{{0.5, 0.3, 0.2}, {0.1, 0.2, 0.3, 0.4}, {1.0, 0.0}, {0.25, 0.75}};
    for (double rate : {0.1, 1.0, 4.0})
        for (double tau : {4.0, 5.0}) singles.push_back(pmf_blend({rate, 10.0, tau}).probs);
    for (const auto& s : singles) {
        ASSERT_LE(s.size(), 4U);
        for (int n = 1; n <= 4; ++n) {
            const auto conv = convolution_power(s, n);
            const auto brute = enumerate_sum(s, n);
            ASSERT_EQ(conv.size(), brute.size());
            for (std::size_t k = 0; k < conv.size(); ++k) EXPECT_NEAR(conv[k], brute[k], 1e-12);
        }
    }
}

TEST(ArrayLow, SingletonIsRenormalizedBlend) {
    const RenewalParams p{0.8, 10.0, 1.0};
    const auto blend = pmf_blend(p);
    const auto arr = pmf_array_low(p, 1);
    EXPECT_NEAR(arr.deficit, 1.0 - sum_of(blend), 1e-15);
    for (std::size_t k = 0; k < arr.probs.size(); ++k) EXPECT_NEAR(arr.probs[k], blend.probs[k] / sum_of(blend), 1e-15);
}

TEST(ArrayLow, SupportNormalizationAndMean) {
    const RenewalParams p{0.6, 10.0, 1.0};
    const auto single = pmf_blend(p);
    const double single_mean = single.mean() / sum_of(single);
    for (std::int64_t n : {2, 5, 16, 64}) {
        const auto arr = pmf_array_low(p, n);
        EXPECT_EQ(arr.k_max(), static_cast<std::size_t>(n * p.pixel_max()));
        EXPECT_NEAR(sum_of(arr), 1.0, 1e-12);
        EXPECT_NEAR(arr.mean(), static_cast<double>(n) * single_mean, 1e-9 * static_cast<double>(n));
    }
    EXPECT_THROW(pmf_array_low(p, 0), ConfigError);
}
