#pragma once

// Output analyses over run files: sentences per output and the share of
// written arithmetic claims that are actually correct.

#include "expression.hpp"
#include "harness.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ccot {

// Sentences end at a run of '.', '!' or '?' followed by whitespace or the
// end of the text. A '.' between digits is a decimal point. A trailing
// unterminated segment counts as one sentence.
inline std::size_t count_sentences(std::string_view text) {
    auto is_term  = [](char c) { return c == '.' || c == '!' || c == '?'; };
    auto is_space = [](char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; };
    auto is_digit = [](char c) { return c >= '0' && c <= '9'; };

    std::size_t count = 0;
    bool content = false;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '.' && i > 0 && i + 1 < text.size() && is_digit(text[i - 1]) && is_digit(text[i + 1])) {
            content = true;
            ++i;
            continue;
        }
        if (is_term(c)) {
            std::size_t j = i;
            while (j < text.size() && is_term(text[j])) {
                ++j;
            }
            if (j == text.size() || is_space(text[j])) {
                if (content) {
                    ++count;
                }
                content = false;
            } else {
                content = true;
            }
            i = j;
            continue;
        }
        if (!is_space(c)) {
            content = true;
        }
        ++i;
    }
    return count + (content ? 1 : 0);
}

struct analysis_report {
    std::string method;
    std::size_t outputs          = 0;
    double      mean_sentences   = 0.0;
    std::size_t expr_total       = 0;
    std::size_t expr_correct     = 0;
    std::size_t expr_div_by_zero = 0; // counted in expr_total as incorrect
    std::size_t expr_unparseable = 0; // not counted in expr_total

    // pooled over all expressions; undefined without expressions
    std::optional<double> proportion_correct() const {
        if (expr_total == 0) {
            return std::nullopt;
        }
        return static_cast<double>(expr_correct) / static_cast<double>(expr_total);
    }
};

inline analysis_report analyze_texts(const std::vector<std::string> & texts, std::string method = {}) {
    analysis_report rep;
    rep.method  = std::move(method);
    rep.outputs = texts.size();
    std::size_t sentences = 0;
    for (const auto & t : texts) {
        sentences += count_sentences(t);
        const auto scan = extract_expressions(t);
        rep.expr_unparseable += scan.unparseable;
        for (const auto & e : scan.expressions) {
            ++rep.expr_total;
            switch (check_expression(e)) {
                case expression_verdict::correct:          ++rep.expr_correct; break;
                case expression_verdict::incorrect:        break;
                case expression_verdict::division_by_zero: ++rep.expr_div_by_zero; break;
            }
        }
    }
    rep.mean_sentences = texts.empty() ? 0.0 : static_cast<double>(sentences) / static_cast<double>(texts.size());
    return rep;
}

// Column label in the style "Baseline", "Amateur 1 (0.8)",
// "Coherence Boosting (0.5)".
inline std::string method_label(const nlohmann::json & manifest) {
    const auto variant = manifest.value("variant", "");
    const auto alpha   = format_alpha(manifest.value("alpha", 0.0));
    if (variant == "BASELINE") return "Baseline";
    if (variant == "NO_CONTEXT") return "Amateur 1 (" + alpha + ")";
    if (variant == "ANSWERS_ONLY") return "Amateur 2 (" + alpha + ")";
    if (variant == "NO_COT") return "Amateur 3 (" + alpha + ")";
    if (variant == "COHERENCE_BOOST") return "Coherence Boosting (" + alpha + ")";
    return variant;
}

inline analysis_report analyze_run(const std::string & path) {
    const auto rf = read_run_file(path);
    std::vector<std::string> texts;
    for (const auto & r : rf.rows) {
        texts.push_back(r.text);
    }
    return analyze_texts(texts, method_label(rf.manifest));
}

inline std::string format_fixed(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

inline std::string report_csv(const std::vector<analysis_report> & reports) {
    std::string out = "method,mean_sentences,proportion_correct,expr_total,expr_correct,outputs\n";
    for (const auto & r : reports) {
        const auto p = r.proportion_correct();
        out += "\"" + r.method + "\"," + format_fixed(r.mean_sentences) + "," + (p ? format_fixed(*p) : "NA") + "," +
               std::to_string(r.expr_total) + "," + std::to_string(r.expr_correct) + "," + std::to_string(r.outputs) +
               "\n";
    }
    return out;
}

// Methods as columns, with a "Mean" row and a "Proportion" row.
inline std::string report_markdown(const std::vector<analysis_report> & reports) {
    std::string header = "| |", rule = "|---|", mean = "| Mean |", prop = "| Proportion |";
    for (const auto & r : reports) {
        const auto p = r.proportion_correct();
        header += " " + r.method + " |";
        rule += "---|";
        mean += " " + format_fixed(r.mean_sentences) + " |";
        prop += " " + (p ? format_fixed(*p) : std::string("n/a")) + " |";
    }
    return header + "\n" + rule + "\n" + mean + "\n" + prop + "\n\n"
           "Proportion pools all `<expr> = <number>` claims across outputs; "
           "a claim is correct when exact rational evaluation matches within 1e-6 relative.\n";
}

} // namespace ccot
