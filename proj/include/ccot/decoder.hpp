#pragma once

// Greedy autoregressive decoding over a contrasted pair of contexts.
//
// Each step scores the expert and amateur sequences, combines the logits,
// takes the argmax and appends that token to both sequences, so the two
// contexts always share the generated continuation.

#include "backend.hpp"
#include "contrast.hpp"
#include "error.hpp"
#include "prompt.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace ccot {

struct generation_config {
    std::size_t              max_new_tokens = 512;
    std::vector<std::string> stop_sequences = { "\nQ:" };
    contrast_config          contrast;
    bool                     record_steps = false;

    void validate() const {
        if (max_new_tokens < 1) {
            throw config_error("max_new_tokens must be >= 1");
        }
        for (const auto & s : stop_sequences) {
            if (s.empty()) {
                throw config_error("stop sequences must be non-empty");
            }
        }
        contrast.validate();
    }
};

enum class stop_reason { eos, stop_seq, max_tokens };

inline std::string_view to_string(stop_reason r) {
    switch (r) {
        case stop_reason::eos:        return "EOS";
        case stop_reason::stop_seq:   return "STOP_SEQ";
        case stop_reason::max_tokens: return "MAX_TOKENS";
    }
    return "?";
}

inline stop_reason parse_stop_reason(std::string_view s) {
    if (s == "EOS")        return stop_reason::eos;
    if (s == "STOP_SEQ")   return stop_reason::stop_seq;
    if (s == "MAX_TOKENS") return stop_reason::max_tokens;
    throw parse_error("unknown stop reason '" + std::string(s) + "'");
}

struct step_info {
    token_id expert_top1   = 0;
    token_id amateur_top1  = -1; // -1 when no amateur was scored
    token_id combined_top1 = 0;
    bool     flipped       = false;

    bool operator==(const step_info &) const = default;
};

struct generation_record {
    std::string            bundle_id;
    token_sequence         tokens;
    // detokenized output, cut before any stop sequence
    std::string            text;
    stop_reason            reason = stop_reason::max_tokens;
    std::vector<step_info> steps;
    // false when a backend failed mid-run; tokens/text hold the partial output
    bool                   complete = true;
    std::string            error;

    std::size_t flip_count() const {
        return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(), [](const step_info & s) { return s.flipped; }));
    }

    bool operator==(const generation_record &) const = default;
};

namespace detail {

// Position of the earliest stop sequence in text, if any.
inline std::optional<std::size_t> find_stop(const std::string & text, const std::vector<std::string> & stops) {
    std::optional<std::size_t> best;
    for (const auto & s : stops) {
        const auto pos = text.find(s);
        if (pos != std::string::npos && (!best || pos < *best)) {
            best = pos;
        }
    }
    return best;
}

// amateur == nullptr decodes from the expert context alone.
inline generation_record decode(const scoring_backend & expert, const scoring_backend * amateur,
                                const prompt_bundle & bundle, const generation_config & config) {
    config.validate();
    if (amateur) {
        check_vocab_compatible(expert, *amateur);
    }

    generation_record rec;
    rec.bundle_id = bundle.question_id;

    token_sequence expert_seq = expert.tokenize(bundle.expert_text);
    token_sequence amateur_seq;
    if (expert_seq.empty()) {
        throw invalid_input("expert prompt tokenizes to an empty sequence");
    }
    if (amateur) {
        amateur_seq = amateur->tokenize(bundle.amateur_text);
        if (amateur_seq.empty()) {
            throw invalid_input("amateur prompt tokenizes to an empty sequence");
        }
    }

    const token_id eos = expert.vocab().eos_id;
    rec.reason = stop_reason::max_tokens;

    try {
        while (rec.tokens.size() < config.max_new_tokens) {
            const logit_vector e = expert.score(expert_seq);
            step_info step;
            token_id next;
            if (amateur) {
                const logit_vector a = amateur->score(amateur_seq);
                next = greedy_select(combine_logits(e, a, config.contrast));
                if (config.record_steps) {
                    step.amateur_top1 = greedy_select(a);
                }
            } else {
                next = greedy_select(e);
            }
            if (config.record_steps) {
                step.expert_top1   = greedy_select(e);
                step.combined_top1 = next;
                step.flipped       = step.combined_top1 != step.expert_top1;
                rec.steps.push_back(step);
            }

            if (next == eos) {
                rec.reason = stop_reason::eos;
                break;
            }
            expert_seq.push_back(next);
            if (amateur) {
                amateur_seq.push_back(next);
            }
            rec.tokens.push_back(next);

            rec.text = expert.detokenize(rec.tokens);
            if (auto pos = find_stop(rec.text, config.stop_sequences)) {
                rec.text.resize(*pos);
                rec.reason = stop_reason::stop_seq;
                return rec;
            }
        }
    } catch (const backend_unavailable & e) {
        rec.complete = false;
        rec.error    = e.what();
    }
    return rec;
}

} // namespace detail

inline generation_record generate(const scoring_backend & expert, const scoring_backend & amateur,
                                  const prompt_bundle & bundle, const generation_config & config) {
    return detail::decode(expert, &amateur, bundle, config);
}

// Plain greedy decoding on the expert prompt; one backend call per step.
inline generation_record generate_baseline(const scoring_backend & expert, const prompt_bundle & bundle,
                                           const generation_config & config) {
    return detail::decode(expert, nullptr, bundle, config);
}

inline nlohmann::json to_json(const step_info & s) {
    return { { "expert_top1", s.expert_top1 },
             { "amateur_top1", s.amateur_top1 },
             { "combined_top1", s.combined_top1 },
             { "flipped", s.flipped } };
}

// GenerationRecord JSONL row.
inline nlohmann::json to_json(const generation_record & r) {
    nlohmann::json j = {
        { "bundle_id", r.bundle_id },
        { "text", r.text },
        { "tokens", r.tokens },
        { "stop_reason", to_string(r.reason) },
    };
    if (!r.steps.empty()) {
        nlohmann::json steps = nlohmann::json::array();
        for (const auto & s : r.steps) {
            steps.push_back(to_json(s));
        }
        j["steps"] = std::move(steps);
    }
    if (!r.complete) {
        j["incomplete"] = true;
        j["error"]      = r.error;
    }
    return j;
}

inline generation_record generation_record_from_json(const nlohmann::json & j) {
    generation_record r;
    r.bundle_id = j.at("bundle_id").get<std::string>();
    r.text      = j.at("text").get<std::string>();
    r.tokens    = j.at("tokens").get<token_sequence>();
    r.reason    = parse_stop_reason(j.at("stop_reason").get<std::string>());
    if (j.contains("steps")) {
        for (const auto & s : j["steps"]) {
            r.steps.push_back({ s.at("expert_top1").get<token_id>(), s.at("amateur_top1").get<token_id>(),
                                s.at("combined_top1").get<token_id>(), s.at("flipped").get<bool>() });
        }
    }
    if (j.value("incomplete", false)) {
        r.complete = false;
        r.error    = j.value("error", "");
    }
    return r;
}

} // namespace ccot
