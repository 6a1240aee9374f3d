#pragma once

// Expert/amateur logit contrast and its softmax/argmax companions.
//
// All functions are pure and reentrant.

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ccot {

using token_id = std::int32_t;

// Next-token scores over the whole vocabulary.
struct logit_vector {
    std::vector<double> scores;

    logit_vector() = default;
    explicit logit_vector(std::vector<double> s) : scores(std::move(s)) {}
    logit_vector(std::initializer_list<double> s) : scores(s) {}

    std::size_t size() const noexcept { return scores.size(); }
    double operator[](std::size_t i) const { return scores[i]; }

    bool operator==(const logit_vector &) const = default;
};

struct prob_distribution {
    std::vector<double> probs;

    prob_distribution() = default;
    explicit prob_distribution(std::vector<double> p) : probs(std::move(p)) {}
    prob_distribution(std::initializer_list<double> p) : probs(p) {}

    std::size_t size() const noexcept { return probs.size(); }
    double operator[](std::size_t i) const { return probs[i]; }

    bool operator==(const prob_distribution &) const = default;
};

enum class combine_mode {
    log_space,   // (1+a)*e - a*m; softmax equals the probability-ratio distribution
    literal_exp, // (1+a)*exp(e) - a*exp(m), jointly max-shifted
};

inline std::string_view to_string(combine_mode m) {
    return m == combine_mode::log_space ? "log_space" : "literal_exp";
}

inline combine_mode parse_combine_mode(std::string_view s) {
    if (s == "log_space" || s == "LOG_SPACE") {
        return combine_mode::log_space;
    }
    if (s == "literal_exp" || s == "LITERAL_EXP") {
        return combine_mode::literal_exp;
    }
    throw invalid_input("unknown combine mode '" + std::string(s) + "' (expected log_space or literal_exp)");
}

struct contrast_config {
    double       alpha = 0.0;
    combine_mode mode  = combine_mode::log_space;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) {
            throw invalid_input("alpha must satisfy 0 <= alpha <= 1, got " + std::to_string(alpha));
        }
    }
};

inline void validate_logits(std::span<const double> v, std::string_view what = "logits") {
    if (v.empty()) {
        throw invalid_input(std::string(what) + " is empty");
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw invalid_logits(std::string(what) + " has a non-finite entry at index " + std::to_string(i));
        }
    }
}

inline logit_vector combine_logits(const logit_vector & expert, const logit_vector & amateur, const contrast_config & cfg) {
    cfg.validate();
    if (expert.size() != amateur.size()) {
        throw vocab_mismatch("expert has " + std::to_string(expert.size()) + " logits, amateur has " +
                             std::to_string(amateur.size()));
    }
    validate_logits(expert.scores, "expert logits");
    validate_logits(amateur.scores, "amateur logits");

    const double a = cfg.alpha;
    std::vector<double> out(expert.size());

    if (cfg.mode == combine_mode::log_space) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = (1.0 + a) * expert[i] - a * amateur[i];
        }
        return logit_vector(std::move(out));
    }

    // exp() overflows for large logits; both terms share one shift so their
    // difference keeps its sign.
    const double shift = std::max(*std::max_element(expert.scores.begin(), expert.scores.end()),
                                  *std::max_element(amateur.scores.begin(), amateur.scores.end()));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (1.0 + a) * std::exp(expert[i] - shift) - a * std::exp(amateur[i] - shift);
    }
    return logit_vector(std::move(out));
}

inline prob_distribution softmax(const logit_vector & v) {
    validate_logits(v.scores);
    const double max_v = *std::max_element(v.scores.begin(), v.scores.end());

    std::vector<double> p(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(v[i] - max_v);
        sum += p[i];
    }
    for (double & x : p) {
        x /= sum;
    }
    return prob_distribution(std::move(p));
}

// Index of the maximum; ties go to the lowest index.
inline token_id greedy_select(const logit_vector & v) {
    validate_logits(v.scores);
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) {
            best = i;
        }
    }
    return static_cast<token_id>(best);
}

inline void validate_distribution(const prob_distribution & p, std::string_view what = "distribution") {
    if (p.size() == 0) {
        throw invalid_input(std::string(what) + " is empty");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p[i]) || p[i] < 0.0) {
            throw invalid_input(std::string(what) + " has an invalid probability at index " + std::to_string(i));
        }
        sum += p[i];
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw invalid_input(std::string(what) + " sums to " + std::to_string(sum) + ", not 1");
    }
}

// normalize(expert^(1+alpha) / amateur^alpha), evaluated in the log domain.
inline prob_distribution contrast_probabilities(const prob_distribution & expert, const prob_distribution & amateur,
                                                double alpha) {
    contrast_config{ alpha, combine_mode::log_space }.validate();
    if (expert.size() != amateur.size()) {
        throw vocab_mismatch("expert has " + std::to_string(expert.size()) + " probabilities, amateur has " +
                             std::to_string(amateur.size()));
    }
    validate_distribution(expert, "expert distribution");
    validate_distribution(amateur, "amateur distribution");

    std::vector<double> log_w(expert.size());
    double max_w = -INFINITY;
    for (std::size_t i = 0; i < expert.size(); ++i) {
        if (amateur[i] == 0.0) {
            throw division_by_zero("amateur probability is zero at index " + std::to_string(i), i);
        }
        // zero expert mass stays zero
        log_w[i] = expert[i] == 0.0 ? -INFINITY : (1.0 + alpha) * std::log(expert[i]) - alpha * std::log(amateur[i]);
        max_w = std::max(max_w, log_w[i]);
    }
    if (!std::isfinite(max_w)) {
        throw invalid_input("expert distribution has no mass");
    }

    std::vector<double> out(expert.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(log_w[i] - max_w);
        sum += out[i];
    }
    for (double & x : out) {
        x /= sum;
    }
    return prob_distribution(std::move(out));
}

} // namespace ccot
