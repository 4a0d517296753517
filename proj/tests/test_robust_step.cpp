#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "test_support.hpp"

using namespace gamehedge;
using testsupport::make_rng;

namespace {

FactorSet factors(std::initializer_list<double> fs) {
    FactorSet out;
    out.factors.assign(fs);
    out.validate();
    return out;
}

// Random straddling factor set with 2..8 entries, occasionally containing 1.
FactorSet rand_factors(std::mt19937_64& rng) {
    FactorSet fs;
    const int downs = testsupport::pick(rng, 1, 3);
    const int ups = testsupport::pick(rng, 1, 3);
    std::vector<double> v;
    for (int i = 0; i < downs; ++i) v.push_back(testsupport::uni(rng, 0.3, 0.95));
    if (testsupport::pick(rng, 0, 2) == 0) v.push_back(1.0);
    for (int i = 0; i < ups; ++i) v.push_back(testsupport::uni(rng, 1.05, 3.0));
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    fs.factors = v;
    return fs;
}

std::vector<double> rand_values(std::mt19937_64& rng, std::size_t m) {
    std::vector<double> v(m);
    for (double& x : v) x = testsupport::uni(rng, -1.0, 2.0);
    return v;
}

}  // namespace

TEST(RobustSup, BinomialPairHitsClosedForm) {
    const FactorSet fs = factors({0.5, 2.0});
    const std::vector<double> v{0.0, 1.0};
    const RobustStepResult r = robust_sup(fs, v);
    EXPECT_NEAR(r.value, 1.0 / 3.0, 1e-15);
    EXPECT_EQ(r.up_index, 1);
    EXPECT_EQ(r.down_index, 0);
    const OneStepMeasure m = measure_from_vertex(fs, r.up_index, r.down_index);
    ASSERT_EQ(m.support.size(), 2u);
    EXPECT_NEAR(m.support[1].prob, 1.0 / 3.0, 1e-15);
    EXPECT_TRUE(m.valid());
}

TEST(RobustSup, ConstantValuesPriceAtTheConstant) {
    const FactorSet fs = factors({0.7, 0.9, 1.2, 1.5});
    const std::vector<double> v(4, 0.42);
    const RobustStepResult r = robust_sup(fs, v);
    EXPECT_NEAR(r.value, 0.42, 1e-12);
    EXPECT_TRUE(measure_from_vertex(fs, r.up_index, r.down_index).valid());
}

TEST(RobustSup, ConvexValuesPickTheExtremePair) {
    FactorSet fs;
    for (const double x : {-0.2, -0.1, 0.1, 0.2}) fs.factors.push_back(std::exp(x));
    std::sort(fs.factors.begin(), fs.factors.end());
    std::vector<double> v;
    for (const double f : fs.factors) v.push_back(std::max(f - 1.0, 0.0));
    const RobustStepResult r = robust_sup(fs, v);
    EXPECT_EQ(r.up_index, 3);
    EXPECT_EQ(r.down_index, 0);
    EXPECT_NEAR(r.value, testsupport::oracle_one_step_sup(fs.factors, v), 1e-15);
}

TEST(RobustSup, RefusesOneSidedFactors) {
    FactorSet fs = factors({1.1, 1.5, 2.0});
    const std::vector<double> v{0.0, 0.0, 0.0};
    EXPECT_THROW(robust_sup(fs, v), NoMartingaleMeasure);
    EXPECT_FALSE(fs.admits_martingale());
}

TEST(RobustSup, TiesBreakToTheLexSmallestPair) {
    // constant values tie every feasible support at the same expectation
    const FactorSet fs = factors({0.25, 0.5, 2.0, 4.0});
    const std::vector<double> v(4, 1.0);
    const RobustStepResult r = robust_sup(fs, v);
    EXPECT_EQ(r.up_index, 2);   // smallest up factor
    EXPECT_EQ(r.down_index, 0); // then smallest down factor
}

TEST(RobustSup, MatchesEnumerationOracle) {
    auto rng = make_rng(21);
    for (int trial = 0; trial < 2000; ++trial) {
        const FactorSet fs = rand_factors(rng);
        const std::vector<double> v = rand_values(rng, fs.factors.size());
        const RobustStepResult r = robust_sup(fs, v);
        EXPECT_NEAR(r.value, testsupport::oracle_one_step_sup(fs.factors, v), 1e-9);
        const OneStepMeasure m = measure_from_vertex(fs, r.up_index, r.down_index);
        ASSERT_TRUE(m.valid());
        double expect = 0.0;
        for (const auto& w : m.support)
            for (std::size_t i = 0; i < fs.factors.size(); ++i)
                if (fs.factors[i] == w.factor) expect += w.prob * v[i];
        EXPECT_NEAR(expect, r.value, 1e-12);  // the reported measure attains the value
    }
}

TEST(RobustSup, MonotoneInValues) {
    auto rng = make_rng(22);
    for (int trial = 0; trial < 500; ++trial) {
        const FactorSet fs = rand_factors(rng);
        std::vector<double> lo = rand_values(rng, fs.factors.size());
        std::vector<double> hi = lo;
        for (double& x : hi) x += testsupport::uni(rng, 0.0, 1.0);
        EXPECT_LE(robust_sup(fs, lo).value, robust_sup(fs, hi).value + 1e-12);
    }
}

TEST(Superhedge, BinomialReplicationGammas) {
    const FactorSet fs = factors({0.5, 2.0});
    const std::vector<double> v{0.0, 1.0};
    const SuperhedgeResult r = one_step_superhedge(1.0, fs, v);
    EXPECT_NEAR(r.capital, 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(r.gamma, 2.0 / 3.0, 1e-12);
}

TEST(Superhedge, ConstantAndLinearValues) {
    const FactorSet fs = factors({0.5, 0.8, 1.25, 2.0});
    const std::vector<double> c(4, 0.9);
    const SuperhedgeResult rc = one_step_superhedge(1.7, fs, c);
    EXPECT_NEAR(rc.capital, 0.9, 1e-12);
    EXPECT_NEAR(rc.gamma, 0.0, 1e-12);

    // values(f) = f - 1 is a tradeable increment: zero capital, unit stock
    std::vector<double> lin;
    for (const double f : fs.factors) lin.push_back(f - 1.0);
    const SuperhedgeResult rl = one_step_superhedge(1.0, fs, lin);
    EXPECT_NEAR(rl.capital, 0.0, 1e-12);
    EXPECT_NEAR(rl.gamma, 1.0, 1e-12);

    // same shape at spot 2 halves the position
    std::vector<double> lin2;
    for (const double f : fs.factors) lin2.push_back(2.0 * (f - 1.0));
    const SuperhedgeResult r2 = one_step_superhedge(2.0, fs, lin2);
    EXPECT_NEAR(r2.capital, 0.0, 1e-12);
    EXPECT_NEAR(r2.gamma, 1.0, 1e-12);
}

TEST(Superhedge, StrongDualityAndCoverage) {
    auto rng = make_rng(23);
    for (int trial = 0; trial < 2000; ++trial) {
        const FactorSet fs = rand_factors(rng);
        const std::vector<double> v = rand_values(rng, fs.factors.size());
        const double spot = testsupport::uni(rng, 0.3, 3.0);
        const SuperhedgeResult h = one_step_superhedge(spot, fs, v);
        const RobustStepResult r = robust_sup(fs, v);
        EXPECT_NEAR(h.capital, r.value, 1e-9);
        for (std::size_t i = 0; i < fs.factors.size(); ++i)
            EXPECT_GE(h.capital + h.gamma * spot * (fs.factors[i] - 1.0), v[i] - 1e-9);
    }
}

TEST(Superhedge, DominatesEverySampledMeasure) {
    auto rng = make_rng(24);
    for (int trial = 0; trial < 500; ++trial) {
        const FactorSet fs = rand_factors(rng);
        const std::vector<double> v = rand_values(rng, fs.factors.size());
        const double cap = robust_sup(fs, v).value;
        const OneStepMeasure m = sample_measure(fs, rng());
        ASSERT_TRUE(m.valid());
        double e = 0.0;
        for (const auto& w : m.support)
            for (std::size_t i = 0; i < fs.factors.size(); ++i)
                if (fs.factors[i] == w.factor) e += w.prob * v[i];
        EXPECT_LE(e, cap + 1e-9);
    }
}

TEST(SampleMeasure, DeterministicAndDegenerate) {
    const FactorSet pair = factors({0.5, 2.0});
    const OneStepMeasure only = sample_measure(pair, 7);
    ASSERT_EQ(only.support.size(), 2u);
    EXPECT_NEAR(only.support[1].prob, 1.0 / 3.0, 1e-12);  // unique law, any seed
    const OneStepMeasure again = sample_measure(pair, 991);
    EXPECT_NEAR(only.support[0].prob, again.support[0].prob, 1e-12);

    const FactorSet wide = factors({0.4, 0.8, 1.0, 1.9});
    const OneStepMeasure a = sample_measure(wide, 123);
    const OneStepMeasure b = sample_measure(wide, 123);
    ASSERT_EQ(a.support.size(), b.support.size());
    for (std::size_t i = 0; i < a.support.size(); ++i) {
        EXPECT_DOUBLE_EQ(a.support[i].factor, b.support[i].factor);
        EXPECT_DOUBLE_EQ(a.support[i].prob, b.support[i].prob);
    }
    EXPECT_TRUE(a.valid());
}

TEST(MartingaleVertices, CountsAndValidity) {
    // 2 ups x 2 downs straddling 1, plus the unit point mass
    const FactorSet fs = factors({0.5, 0.8, 1.0, 1.25, 2.0});
    const auto vs = martingale_vertices(fs);
    EXPECT_EQ(vs.size(), 5u);
    for (const RobustStepResult& v : vs)
        EXPECT_TRUE(measure_from_vertex(fs, v.up_index, v.down_index).valid());
}
