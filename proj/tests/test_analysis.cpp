#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace ccot;

TEST(CountSentences, Basics) {
    EXPECT_EQ(count_sentences(""), 0u);
    EXPECT_EQ(count_sentences("   "), 0u);
    EXPECT_EQ(count_sentences("One. Two! Three?"), 3u);
    EXPECT_EQ(count_sentences("No terminator"), 1u);
    EXPECT_EQ(count_sentences("One. Then trailing"), 2u);
    EXPECT_EQ(count_sentences("Wait... really?! Yes."), 3u);
}

TEST(CountSentences, DecimalsAndAbbreviatedTokens) {
    EXPECT_EQ(count_sentences("It costs 2.50 dollars. Done."), 2u);
    EXPECT_EQ(count_sentences("Pi is 3.14."), 1u);
    EXPECT_EQ(count_sentences("Visit example.com today."), 1u);
    EXPECT_EQ(count_sentences("First.\nSecond."), 2u);
}

TEST(CountSentences, PropertyJoinedSentences) {
    std::mt19937_64 rng(8);
    const std::vector<std::string> bodies = { "The cost is 3.5 dollars", "So 2 + 2 = 4", "He left", "Yes" };
    const std::vector<std::string> ends = { ".", "!", "?", "..." };
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 6;
        std::string text;
        for (std::size_t i = 0; i < n; ++i) {
            if (i) text += (rng() % 2) ? " " : "\n";
            text += bodies[rng() % bodies.size()] + ends[rng() % ends.size()];
        }
        EXPECT_EQ(count_sentences(text), n) << text;
    }
}

TEST(AnalyzeTexts, WorkedExample) {
    const auto rep = analyze_texts({ "3 + 4 = 7. Done.", "2 * 3 = 5." }, "m");
    EXPECT_EQ(rep.outputs, 2u);
    EXPECT_DOUBLE_EQ(rep.mean_sentences, 1.5);
    EXPECT_EQ(rep.expr_total, 2u);
    EXPECT_EQ(rep.expr_correct, 1u);
    ASSERT_TRUE(rep.proportion_correct().has_value());
    EXPECT_DOUBLE_EQ(*rep.proportion_correct(), 0.5);
}

TEST(AnalyzeTexts, NoExpressionsHasNoProportion) {
    const auto rep = analyze_texts({ "Nothing to check." });
    EXPECT_FALSE(rep.proportion_correct().has_value());
    const auto md = report_markdown({ rep });
    EXPECT_NE(md.find("n/a"), std::string::npos);
}

TEST(AnalyzeTexts, ProportionIsPooled) {
    // 1 of 1 in the first output, 0 of 3 in the second: pooled 1/4, not 1/2
    const auto rep = analyze_texts({ "1 + 1 = 2", "1 + 1 = 3, 2 + 2 = 5, 3 + 3 = 7" });
    EXPECT_DOUBLE_EQ(*rep.proportion_correct(), 0.25);
}

TEST(AnalyzeTexts, DivisionByZeroCountsAsIncorrect) {
    const auto rep = analyze_texts({ "5 / 0 = 1 and 1 + 1 = 2" });
    EXPECT_EQ(rep.expr_total, 2u);
    EXPECT_EQ(rep.expr_div_by_zero, 1u);
    EXPECT_DOUBLE_EQ(*rep.proportion_correct(), 0.5);
}

TEST(Reports, MethodLabels) {
    EXPECT_EQ(method_label({ { "variant", "BASELINE" }, { "alpha", 0.0 } }), "Baseline");
    EXPECT_EQ(method_label({ { "variant", "NO_CONTEXT" }, { "alpha", 0.8 } }), "Amateur 1 (0.8)");
    EXPECT_EQ(method_label({ { "variant", "ANSWERS_ONLY" }, { "alpha", 0.5 } }), "Amateur 2 (0.5)");
    EXPECT_EQ(method_label({ { "variant", "NO_COT" }, { "alpha", 0.5 } }), "Amateur 3 (0.5)");
    EXPECT_EQ(method_label({ { "variant", "COHERENCE_BOOST" }, { "alpha", 0.5 } }), "Coherence Boosting (0.5)");
}

TEST(Reports, MarkdownHasMethodsAsColumns) {
    auto a = analyze_texts({ "1 + 1 = 2." }, "Baseline");
    auto b = analyze_texts({ "1 + 1 = 3. Two." }, "Amateur 1 (0.8)");
    const auto md = report_markdown({ a, b });
    EXPECT_EQ(md.rfind("| | Baseline | Amateur 1 (0.8) |\n|---|---|---|\n| Mean | 1.000 | 2.000 |\n"
                       "| Proportion | 1.000 | 0.000 |\n", 0), 0u);
    const auto csv = report_csv({ a, b });
    EXPECT_EQ(csv.rfind("method,mean_sentences,proportion_correct,expr_total,expr_correct,outputs\n", 0), 0u);
}

TEST(Reports, AnalyzeRunFile) {
    synthetic_backend be(synthetic_options{ 31 });
    eval_spec spec;
    spec.dataset_name = "arith";
    spec.records   = load_dataset(ccot_test::fixture("arith_dataset.jsonl"), dataset_format::canonical_jsonl);
    spec.exemplars = load_exemplars(ccot_test::fixture("exemplars.jsonl"));
    spec.method    = amateur_variant{ amateur_kind::no_cot, {} };
    spec.generation.max_new_tokens = 12;
    spec.generation.contrast.alpha = 0.5;
    const auto dir  = ccot_test::scratch_dir("analysis");
    const auto path = (dir / "run.jsonl").string();
    const auto res  = run_eval(be, be, spec, path);
    const auto rep  = analyze_run(path);
    EXPECT_EQ(rep.method, "Amateur 3 (0.5)");
    EXPECT_EQ(rep.outputs, res.rows.size());
    std::vector<std::string> texts;
    for (const auto & r : res.rows) texts.push_back(r.text);
    EXPECT_DOUBLE_EQ(rep.mean_sentences, analyze_texts(texts).mean_sentences);
}
