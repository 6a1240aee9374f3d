#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ccot;
using ccot_test::random_logits;
using ccot_test::ratio_oracle;

namespace {

const contrast_config log_cfg(double a) { return { a, combine_mode::log_space }; }
const contrast_config lit_cfg(double a) { return { a, combine_mode::literal_exp }; }

} // namespace

TEST(CombineLogits, LogSpaceWorkedExample) {
    // 1.5 * [2, 1, 0] - 0.5 * [0, 1, 2]
    const auto c = combine_logits({ 2.0, 1.0, 0.0 }, { 0.0, 1.0, 2.0 }, log_cfg(0.5));
    ASSERT_EQ(c.size(), 3u);
    EXPECT_DOUBLE_EQ(c[0], 3.0);
    EXPECT_DOUBLE_EQ(c[1], 1.0);
    EXPECT_DOUBLE_EQ(c[2], -1.0);
}

TEST(CombineLogits, AlphaZeroReturnsExpert) {
    const logit_vector e{ 3.5, -1.25, 0.0 };
    EXPECT_EQ(combine_logits(e, { 9.0, 9.0, -9.0 }, log_cfg(0.0)), e);
}

TEST(CombineLogits, GreedyPrefersContrastedToken) {
    // expert prefers 0, but the amateur is far more confident in 0 than in 1
    const logit_vector e{ 2.0, 1.9 };
    const logit_vector a{ 3.0, 0.0 };
    EXPECT_EQ(greedy_select(e), 0);
    EXPECT_EQ(greedy_select(combine_logits(e, a, log_cfg(0.5))), 1);
}

TEST(CombineLogits, LiteralModeFormula) {
    const logit_vector e{ 1.0, 0.5, -2.0 };
    const logit_vector a{ 0.0, 2.0, -1.0 };
    const double alpha = 0.7;
    const auto c = combine_logits(e, a, lit_cfg(alpha));
    const double m = 2.0; // joint maximum
    for (std::size_t i = 0; i < 3; ++i) {
        const double expected = (1 + alpha) * std::exp(e[i] - m) - alpha * std::exp(a[i] - m);
        EXPECT_NEAR(c[i], expected, 1e-15);
    }
}

TEST(CombineLogits, LiteralModeSurvivesHugeLogits) {
    const auto c = combine_logits({ 1000.0, 999.0 }, { 998.0, 1000.0 }, lit_cfg(0.5));
    EXPECT_TRUE(std::isfinite(c[0]));
    EXPECT_TRUE(std::isfinite(c[1]));
    EXPECT_EQ(greedy_select(c), 0);
}

TEST(CombineLogits, RejectsLengthMismatch) {
    EXPECT_THROW(combine_logits({ 1.0, 2.0 }, { 1.0 }, log_cfg(0.5)), vocab_mismatch);
}

TEST(CombineLogits, RejectsNonFinite) {
    EXPECT_THROW(combine_logits({ 1.0, NAN }, { 1.0, 1.0 }, log_cfg(0.5)), invalid_logits);
    EXPECT_THROW(combine_logits({ 1.0, 1.0 }, { INFINITY, 1.0 }, log_cfg(0.5)), invalid_logits);
}

TEST(CombineLogits, RejectsAlphaOutOfRange) {
    EXPECT_THROW(combine_logits({ 1.0 }, { 1.0 }, log_cfg(-0.1)), invalid_input);
    EXPECT_THROW(combine_logits({ 1.0 }, { 1.0 }, log_cfg(1.5)), invalid_input);
    EXPECT_THROW(combine_logits({ 1.0 }, { 1.0 }, log_cfg(NAN)), invalid_input);
    EXPECT_NO_THROW(combine_logits({ 1.0 }, { 1.0 }, log_cfg(1.0)));
}

TEST(CombineLogits, RejectsEmpty) {
    EXPECT_THROW(combine_logits(logit_vector{}, logit_vector{}, log_cfg(0.5)), invalid_input);
}

TEST(Softmax, SumsToOneAndIsShiftInvariant) {
    const logit_vector v{ 1.0, 2.0, 3.0 };
    const auto p = softmax(v);
    EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-15);
    const auto q = softmax({ 1001.0, 1002.0, 1003.0 });
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(p[i], q[i], 1e-15);
    }
}

TEST(GreedySelect, TiesGoToLowestIndex) {
    EXPECT_EQ(greedy_select({ 1.0, 3.0, 3.0, 2.0 }), 1);
    EXPECT_EQ(greedy_select({ 0.0, 0.0 }), 0);
}

TEST(ContrastProbabilities, WorkedExample) {
    // p_e^2 / p_a = [0.49/0.5, 0.09/0.5] -> [0.98, 0.18] / 1.16
    const auto p = contrast_probabilities({ 0.7, 0.3 }, { 0.5, 0.5 }, 1.0);
    EXPECT_NEAR(p[0], 0.98 / 1.16, 1e-12);
    EXPECT_NEAR(p[1], 0.18 / 1.16, 1e-12);
}

TEST(ContrastProbabilities, ZeroAmateurMassIsReported) {
    try {
        contrast_probabilities({ 0.5, 0.5 }, { 1.0, 0.0 }, 0.5);
        FAIL() << "expected division_by_zero";
    } catch (const division_by_zero & e) {
        EXPECT_EQ(e.index(), 1u);
    }
}

TEST(ContrastProbabilities, RejectsUnnormalized) {
    EXPECT_THROW(contrast_probabilities({ 0.5, 0.6 }, { 0.5, 0.5 }, 0.5), invalid_input);
}

TEST(ContrastProperty, SoftmaxOfCombinedMatchesRatioOracle) {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<std::size_t> size(1, 64);
    for (double alpha : { 0.0, 0.3, 0.5, 0.8, 1.0 }) {
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = size(rng);
            const auto e = random_logits(rng, n);
            const auto a = random_logits(rng, n);
            const auto got    = softmax(combine_logits(logit_vector(e), logit_vector(a), log_cfg(alpha)));
            const auto expect = ratio_oracle(e, a, alpha);
            for (std::size_t i = 0; i < n; ++i) {
                ASSERT_NEAR(got[i], expect[i], 1e-9) << "alpha=" << alpha << " trial=" << trial << " i=" << i;
            }
        }
    }
}

TEST(ContrastProperty, ContrastProbabilitiesMatchesSoftmaxRoute) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const auto e = random_logits(rng, 17);
        const auto a = random_logits(rng, 17);
        const double alpha = std::uniform_real_distribution<double>(0, 1)(rng);
        const auto via_logits = softmax(combine_logits(logit_vector(e), logit_vector(a), log_cfg(alpha)));
        const auto via_probs  = contrast_probabilities(softmax(logit_vector(e)), softmax(logit_vector(a)), alpha);
        for (std::size_t i = 0; i < 17; ++i) {
            ASSERT_NEAR(via_logits[i], via_probs[i], 1e-9);
        }
    }
}

TEST(ContrastProperty, AlphaZeroIsNeutralInBothModes) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const logit_vector e(random_logits(rng, 32));
        const logit_vector a(random_logits(rng, 32));
        EXPECT_EQ(greedy_select(combine_logits(e, a, log_cfg(0.0))), greedy_select(e));
        EXPECT_EQ(greedy_select(combine_logits(e, a, lit_cfg(0.0))), greedy_select(e));
        const auto p = softmax(combine_logits(e, a, log_cfg(0.0)));
        const auto q = softmax(e);
        for (std::size_t i = 0; i < 32; ++i) {
            ASSERT_NEAR(p[i], q[i], 1e-12);
        }
    }
}

TEST(ContrastProperty, EqualContextsAreNeutral) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 300; ++trial) {
        const logit_vector e(random_logits(rng, 24));
        const double alpha = std::uniform_real_distribution<double>(0, 1)(rng);
        const auto p = softmax(combine_logits(e, e, log_cfg(alpha)));
        const auto q = softmax(e);
        for (std::size_t i = 0; i < 24; ++i) {
            ASSERT_NEAR(p[i], q[i], 1e-12);
        }
        EXPECT_EQ(greedy_select(combine_logits(e, e, lit_cfg(alpha))), greedy_select(e));
    }
}

TEST(ContrastProperty, ShiftInvariance) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> shift(-50, 50);
    for (int trial = 0; trial < 300; ++trial) {
        const auto e = random_logits(rng, 20);
        const auto a = random_logits(rng, 20);
        const double alpha = std::uniform_real_distribution<double>(0, 1)(rng);
        auto es = e, as = a;
        const double ce = shift(rng), ca = shift(rng);
        for (auto & x : es) x += ce;
        for (auto & x : as) x += ca;
        const auto p = softmax(combine_logits(logit_vector(e), logit_vector(a), log_cfg(alpha)));
        const auto q = softmax(combine_logits(logit_vector(es), logit_vector(as), log_cfg(alpha)));
        for (std::size_t i = 0; i < 20; ++i) {
            ASSERT_NEAR(p[i], q[i], 1e-9);
        }
    }
}

TEST(ContrastProperty, Deterministic) {
    std::mt19937_64 rng(19);
    const logit_vector e(random_logits(rng, 50));
    const logit_vector a(random_logits(rng, 50));
    for (auto mode : { combine_mode::log_space, combine_mode::literal_exp }) {
        const contrast_config cfg{ 0.6, mode };
        EXPECT_EQ(combine_logits(e, a, cfg), combine_logits(e, a, cfg));
    }
}

TEST(CombineMode, ParsesBothSpellings) {
    EXPECT_EQ(parse_combine_mode("log_space"), combine_mode::log_space);
    EXPECT_EQ(parse_combine_mode("LITERAL_EXP"), combine_mode::literal_exp);
    EXPECT_THROW(parse_combine_mode("linear"), invalid_input);
}
