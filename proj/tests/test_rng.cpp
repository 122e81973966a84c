#include <gtest/gtest.h>

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "safescore/safescore.hpp"

using namespace safescore;

TEST(MixSeed, MatchesKnownSplitmixVector) {
    // first splitmix64 output from state 0, a widely published reference value
    EXPECT_EQ(mix_seed(0), 0xE220A8397B1DCDAFULL);
    EXPECT_NE(mix_seed(1), mix_seed(2));
    EXPECT_NE(mix_seed(0), 0u);
}

TEST(MixSeed, ChainedFormsAreOrderSensitive) {
    EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
    EXPECT_NE(mix_seed(1, 2, 3), mix_seed(3, 2, 1));
    EXPECT_EQ(mix_seed(7, 9), mix_seed(7, 9));
}

TEST(Rng, SameSeedSameSequence) {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
    Rng c(42), d(42);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_EQ(c.uniform(), d.uniform());
        EXPECT_EQ(c.normal(), d.normal());
    }
}

TEST(Rng, DifferentSeedsDiverge) {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 100; ++i) same += a.next_u64() == b.next_u64();
    EXPECT_LT(same, 3);
}

TEST(Rng, UniformStaysInUnitInterval) {
    Rng r(7);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / 10000.0, 0.5, 0.02);
}

TEST(Rng, UniformRangeRespectsBounds) {
    Rng r(9);
    for (int i = 0; i < 1000; ++i) {
        const double v = r.uniform(-3.0, 5.0);
        ASSERT_GE(v, -3.0);
        ASSERT_LT(v, 5.0);
    }
}

TEST(Rng, BelowCoversAllResidues) {
    Rng r(11);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t v = r.below(7);
        ASSERT_LT(v, 7u);
        seen.insert(v);
    }
    EXPECT_EQ(seen.size(), 7u);
    EXPECT_EQ(r.below(1), 0u);
}

TEST(Rng, UniformIntHitsBothEndpoints) {
    Rng r(13);
    bool lo = false, hi = false;
    for (int i = 0; i < 1000; ++i) {
        const long long v = r.uniform_int(-2, 2);
        ASSERT_GE(v, -2);
        ASSERT_LE(v, 2);
        lo |= v == -2;
        hi |= v == 2;
    }
    EXPECT_TRUE(lo);
    EXPECT_TRUE(hi);
}

TEST(Rng, BernoulliDegenerateProbabilities) {
    Rng r(17);
    for (int i = 0; i < 100; ++i) {
        EXPECT_FALSE(r.bernoulli(0.0));
        EXPECT_TRUE(r.bernoulli(1.0));
    }
}

TEST(Rng, NormalMomentsConverge) {
    Rng r(19);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = r.normal(2.0, 3.0);
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    EXPECT_NEAR(mean, 2.0, 0.05);
    EXPECT_NEAR(std::sqrt(var), 3.0, 0.05);
}

TEST(Rng, ShuffleIsPermutationAndDeterministic) {
    std::vector<int> v(52);
    for (int i = 0; i < 52; ++i) v[static_cast<std::size_t>(i)] = i;
    std::vector<int> a = v, b = v, c = v;
    Rng r1(23), r2(23), r3(24);
    r1.shuffle(a);
    r2.shuffle(b);
    r3.shuffle(c);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    std::sort(a.begin(), a.end());
    EXPECT_EQ(a, v);
}

TEST(Rng, SampleWithoutReplacementIsSortedAndDistinct) {
    Rng r(29);
    for (int trial = 0; trial < 50; ++trial) {
        const auto s = r.sample_without_replacement(20, 8);
        ASSERT_EQ(s.size(), 8u);
        EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
        for (std::size_t i = 1; i < s.size(); ++i) EXPECT_NE(s[i - 1], s[i]);
        for (const int x : s) {
            EXPECT_GE(x, 0);
            EXPECT_LT(x, 20);
        }
    }
    const auto all = r.sample_without_replacement(5, 5);
    EXPECT_EQ(all, (std::vector<int>{0, 1, 2, 3, 4}));
}
