#pragma once

// Additively smoothed n-gram model used as a desk-scale scoring backend.
//
//   P(t | ctx) = (count(ctx, t) + delta) / (count(ctx) + delta * V)
//
// ctx is the last min(order - 1, len) tokens of the query. Counts are kept
// for every context length 0..order-1 so short queries use all positions.

#include "backend.hpp"
#include "error.hpp"
#include "vocabulary.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <unordered_map>
#include <vector>

namespace ccot {

class ngram_model {
public:
    struct context_counts {
        std::uint64_t                               total = 0;
        std::unordered_map<token_id, std::uint64_t> next;

        bool operator==(const context_counts &) const = default;
    };

    using count_table = std::map<token_sequence, context_counts>;

    ngram_model(int order, double delta, vocabulary vocab) : order_(order), delta_(delta), vocab_(std::move(vocab)) {
        if (order_ < 1) {
            throw invalid_input("n-gram order must be >= 1");
        }
        if (!(delta_ > 0.0) || !std::isfinite(delta_)) {
            throw invalid_input("smoothing delta must be > 0");
        }
    }

    static ngram_model train(std::string_view corpus, int order, double delta) {
        if (corpus.empty()) {
            throw invalid_corpus("corpus is empty");
        }
        vocabulary vocab;
        token_sequence tokens;
        for (const auto & piece : split_words(corpus)) {
            tokens.push_back(vocab.add(piece));
        }

        ngram_model m(order, delta, std::move(vocab));
        m.count(tokens);
        return m;
    }

    // Adds the sliding windows of `tokens` to the counts.
    void count(std::span<const token_id> tokens) {
        vocab_.check(tokens);
        const std::size_t max_ctx = static_cast<std::size_t>(order_ - 1);
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            for (std::size_t len = 0; len <= std::min(max_ctx, i); ++len) {
                auto & c = counts_[token_sequence(tokens.begin() + (i - len), tokens.begin() + i)];
                c.total += 1;
                c.next[tokens[i]] += 1;
            }
        }
    }

    // Sets the counts for one context directly.
    void set_counts(token_sequence ctx, std::unordered_map<token_id, std::uint64_t> next) {
        if (ctx.size() > static_cast<std::size_t>(order_ - 1)) {
            throw invalid_input("context longer than order - 1");
        }
        vocab_.check(ctx);
        context_counts c;
        for (auto [t, n] : next) {
            vocab_.check(t);
            c.total += n;
        }
        c.next = std::move(next);
        counts_[std::move(ctx)] = std::move(c);
    }

    std::span<const token_id> context_of(std::span<const token_id> tokens) const {
        const std::size_t len = std::min(static_cast<std::size_t>(order_ - 1), tokens.size());
        return tokens.subspan(tokens.size() - len);
    }

    double probability(std::span<const token_id> tokens, token_id t) const {
        vocab_.check(t);
        const auto ctx = context_of(tokens);
        const double V = static_cast<double>(vocab_.size());
        auto it = counts_.find(token_sequence(ctx.begin(), ctx.end()));
        if (it == counts_.end()) {
            return 1.0 / V;
        }
        auto jt = it->second.next.find(t);
        const double c = jt == it->second.next.end() ? 0.0 : static_cast<double>(jt->second);
        return (c + delta_) / (static_cast<double>(it->second.total) + delta_ * V);
    }

    // Log-probabilities of every next token.
    logit_vector score(std::span<const token_id> tokens) const {
        vocab_.check(tokens);
        const auto ctx = context_of(tokens);
        const std::size_t V = vocab_.size();

        auto it = counts_.find(token_sequence(ctx.begin(), ctx.end()));
        if (it == counts_.end()) {
            return logit_vector(std::vector<double>(V, -std::log(static_cast<double>(V))));
        }
        const auto & c = it->second;
        const double log_denom = std::log(static_cast<double>(c.total) + delta_ * static_cast<double>(V));
        std::vector<double> out(V, std::log(delta_) - log_denom);
        for (auto [t, n] : c.next) {
            out[static_cast<std::size_t>(t)] = std::log(static_cast<double>(n) + delta_) - log_denom;
        }
        return logit_vector(std::move(out));
    }

    int order() const noexcept { return order_; }
    double delta() const noexcept { return delta_; }
    const vocabulary & vocab() const noexcept { return vocab_; }
    const count_table & counts() const noexcept { return counts_; }

    bool operator==(const ngram_model & o) const {
        return order_ == o.order_ && delta_ == o.delta_ && vocab_ == o.vocab_ && counts_ == o.counts_;
    }

    nlohmann::json to_json() const {
        nlohmann::json counts = nlohmann::json::array();
        for (const auto & [ctx, c] : counts_) {
            // sorted so the file is reproducible
            std::map<token_id, std::uint64_t> next(c.next.begin(), c.next.end());
            nlohmann::json nj = nlohmann::json::array();
            for (auto [t, n] : next) {
                nj.push_back({ t, n });
            }
            counts.push_back({ { "ctx", ctx }, { "next", nj } });
        }
        return {
            { "format", "ccot-ngram-v1" },
            { "order", order_ },
            { "delta", delta_ },
            { "vocab", vocab_.strings() },
            { "counts", counts },
        };
    }

    static ngram_model from_json(const nlohmann::json & j) {
        try {
            if (j.at("format").get<std::string>() != "ccot-ngram-v1") {
                throw parse_error("unsupported n-gram model format");
            }
            const auto strings = j.at("vocab").get<std::vector<std::string>>();
            if (strings.size() < 2 || strings[0] != unk_token || strings[1] != eos_token) {
                throw parse_error("n-gram vocabulary must start with <unk> and </s>");
            }
            vocabulary vocab(std::vector<std::string>(strings.begin() + 2, strings.end()));
            if (vocab.size() != strings.size()) {
                throw parse_error("n-gram vocabulary has duplicate entries");
            }
            ngram_model m(j.at("order").get<int>(), j.at("delta").get<double>(), std::move(vocab));
            for (const auto & row : j.at("counts")) {
                std::unordered_map<token_id, std::uint64_t> next;
                for (const auto & tn : row.at("next")) {
                    next[tn.at(0).get<token_id>()] = tn.at(1).get<std::uint64_t>();
                }
                m.set_counts(row.at("ctx").get<token_sequence>(), std::move(next));
            }
            return m;
        } catch (const nlohmann::json::exception & e) {
            throw parse_error(std::string("malformed n-gram model: ") + e.what());
        }
    }

    void save(const std::string & path) const {
        std::ofstream f(path);
        if (!f) {
            throw config_error("cannot write n-gram model to " + path);
        }
        f << to_json().dump() << "\n";
    }

    static ngram_model load(const std::string & path) {
        std::ifstream f(path);
        if (!f) {
            throw config_error("cannot open n-gram model " + path);
        }
        nlohmann::json j;
        try {
            f >> j;
        } catch (const nlohmann::json::exception & e) {
            throw parse_error("malformed n-gram model " + path + ": " + e.what());
        }
        return from_json(j);
    }

private:
    int         order_;
    double      delta_;
    vocabulary  vocab_;
    count_table counts_;
};

class ngram_backend final : public scoring_backend {
public:
    explicit ngram_backend(std::shared_ptr<const ngram_model> model, std::string name = "ngram")
        : model_(std::move(model)), info_(model_->vocab().info()), name_(std::move(name)) {}

    const vocab_info & vocab() const override { return info_; }

    logit_vector score(std::span<const token_id> tokens) const override {
        if (tokens.empty()) {
            throw invalid_input("cannot score an empty token sequence");
        }
        return model_->score(tokens);
    }

    token_sequence tokenize(std::string_view text) const override { return model_->vocab().tokenize(text); }
    std::string detokenize(std::span<const token_id> tokens) const override { return model_->vocab().detokenize(tokens); }

    std::string descriptor() const override {
        return name_ + ":order=" + std::to_string(model_->order()) + ",table=" + info_.table_hash;
    }

    const ngram_model & model() const noexcept { return *model_; }

private:
    std::shared_ptr<const ngram_model> model_;
    vocab_info                         info_;
    std::string                        name_;
};

} // namespace ccot
