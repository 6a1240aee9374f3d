#pragma once

// Contract for next-token scoring plus the seeded synthetic backend.

#include "contrast.hpp"
#include "error.hpp"
#include "vocabulary.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace ccot {

// A language model seen only through full-vocabulary next-token logits.
// score() must be safe to call concurrently and must return identical
// vectors for identical inputs.
class scoring_backend {
public:
    virtual ~scoring_backend() = default;

    virtual const vocab_info & vocab() const = 0;

    // Logits for the token following `tokens`. Length is vocab().vocab_size.
    virtual logit_vector score(std::span<const token_id> tokens) const = 0;

    virtual token_sequence tokenize(std::string_view text) const = 0;
    virtual std::string    detokenize(std::span<const token_id> tokens) const = 0;

    // Short human readable identity, recorded in run manifests.
    virtual std::string descriptor() const = 0;
};

using backend_ptr = std::shared_ptr<const scoring_backend>;

inline void check_vocab_compatible(const scoring_backend & a, const scoring_backend & b) {
    const auto & va = a.vocab();
    const auto & vb = b.vocab();
    if (va.vocab_size != vb.vocab_size || va.table_hash != vb.table_hash || va.eos_id != vb.eos_id) {
        throw vocab_mismatch("backends disagree on the vocabulary: " + a.descriptor() + " (size " +
                             std::to_string(va.vocab_size) + ", table " + va.table_hash + ") vs " + b.descriptor() +
                             " (size " + std::to_string(vb.vocab_size) + ", table " + vb.table_hash + ")");
    }
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct synthetic_options {
    std::uint64_t seed = 0;
    // number of trailing tokens that drive the dominant logit component
    std::size_t window = 4;
    double      scale  = 4.0;
    // weight of a component keyed on the whole sequence, so that contexts
    // with equal suffixes still score differently
    double      context_weight = 1.0;
};

// Deterministic pseudo-model: logits are a pure function of (seed, tokens).
class synthetic_backend final : public scoring_backend {
public:
    explicit synthetic_backend(synthetic_options opts = {}, vocabulary vocab = vocabulary::builtin())
        : opts_(opts), vocab_(std::move(vocab)), info_(vocab_.info()) {}

    const vocab_info & vocab() const override { return info_; }
    const vocabulary & table() const noexcept { return vocab_; }
    const synthetic_options & options() const noexcept { return opts_; }

    logit_vector score(std::span<const token_id> tokens) const override {
        if (tokens.empty()) {
            throw invalid_input("cannot score an empty token sequence");
        }
        vocab_.check(tokens);

        std::uint64_t local = splitmix64(opts_.seed);
        const std::size_t from = tokens.size() > opts_.window ? tokens.size() - opts_.window : 0;
        for (std::size_t i = from; i < tokens.size(); ++i) {
            local = splitmix64(local ^ static_cast<std::uint64_t>(tokens[i]));
        }
        std::uint64_t global = splitmix64(opts_.seed ^ 0x5851f42d4c957f2dULL);
        for (token_id t : tokens) {
            global = splitmix64(global ^ static_cast<std::uint64_t>(t));
        }

        std::vector<double> out(info_.vocab_size);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = opts_.scale * unit(local, i) + opts_.context_weight * unit(global, i);
        }
        return logit_vector(std::move(out));
    }

    token_sequence tokenize(std::string_view text) const override { return vocab_.tokenize(text); }
    std::string detokenize(std::span<const token_id> tokens) const override { return vocab_.detokenize(tokens); }

    std::string descriptor() const override { return "synthetic:seed=" + std::to_string(opts_.seed); }

private:
    // uniform in [-1, 1)
    static double unit(std::uint64_t state, std::size_t i) {
        const std::uint64_t x = splitmix64(state + 0x9e3779b97f4a7c15ULL * (i + 1));
        return 2.0 * (static_cast<double>(x >> 11) * 0x1.0p-53) - 1.0;
    }

    synthetic_options opts_;
    vocabulary        vocab_;
    vocab_info        info_;
};

} // namespace ccot
