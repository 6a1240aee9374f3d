#pragma once

// Few-shot prompt construction: the expert chain-of-thought prompt and the
// reduced-context amateur prompts it is contrasted with.
//
// Expert:            Q: {question i}\nA: {cot i} {answer i}\n ... Q: {new}\nA:_
// no_context:        A:_
// answers_only:      A: {answer i}\n ... Q: {new}\nA:_
// no_cot:            Q: {question i}\nA: {answer i}\n ... Q: {new}\nA:_
// coherence_boost:   last N characters of the expert prompt
//
// (_ is a single trailing space.) Multiple-choice options follow the
// question, one "(label) text" line each, labels lowercased.

#include "error.hpp"
#include "hash.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ccot {

struct choice {
    std::string label;
    std::string text;

    bool operator==(const choice &) const = default;
};

using choice_list = std::vector<choice>;

struct exemplar {
    std::string question;
    std::string cot;
    std::string answer;
    choice_list choices;

    bool operator==(const exemplar &) const = default;
};

enum class amateur_kind { no_context, answers_only, no_cot, coherence_boost };

struct amateur_variant {
    amateur_kind kind = amateur_kind::no_context;
    // coherence_boost only; unset keeps the final question block
    std::optional<std::size_t> keep_last_chars;

    bool operator==(const amateur_variant &) const = default;
};

struct prompt_bundle {
    std::string     question_id;
    std::string     expert_text;
    std::string     amateur_text;
    amateur_variant variant;
};

inline constexpr std::string_view generation_cue = "A: ";
inline constexpr std::size_t      default_shots  = 8;

inline std::string_view to_string(amateur_kind k) {
    switch (k) {
        case amateur_kind::no_context:      return "no_context";
        case amateur_kind::answers_only:    return "answers_only";
        case amateur_kind::no_cot:          return "no_cot";
        case amateur_kind::coherence_boost: return "coherence_boost";
    }
    return "?";
}

inline amateur_kind parse_amateur_kind(std::string_view s) {
    if (s == "no_context")      return amateur_kind::no_context;
    if (s == "answers_only")    return amateur_kind::answers_only;
    if (s == "no_cot")          return amateur_kind::no_cot;
    if (s == "coherence_boost") return amateur_kind::coherence_boost;
    throw config_error("unknown amateur variant '" + std::string(s) + "'");
}

inline std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

inline std::string format_question(std::string_view question, const choice_list & choices) {
    std::string out(question);
    for (const auto & c : choices) {
        out += "\n(" + lowercase(c.label) + ") " + c.text;
    }
    return out;
}

// Last n code points of a UTF-8 string.
inline std::string utf8_suffix(std::string_view s, std::size_t n) {
    std::size_t pos = s.size();
    while (pos > 0 && n > 0) {
        --pos;
        if ((static_cast<unsigned char>(s[pos]) & 0xC0) != 0x80) {
            --n;
        }
    }
    return std::string(s.substr(pos));
}

inline std::size_t utf8_length(std::string_view s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
        return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    }));
}

namespace detail {

inline void check_exemplar(const exemplar & e, std::size_t i, bool need_question, bool need_cot) {
    const auto where = "exemplar " + std::to_string(i + 1);
    if (need_question && e.question.empty()) {
        throw invalid_exemplar(where + " has no question");
    }
    if (e.answer.empty()) {
        throw invalid_exemplar(where + " has no answer");
    }
    if (need_cot && e.cot.empty()) {
        throw invalid_exemplar(where + " has no chain of thought");
    }
}

inline std::string final_block(std::string_view question, const choice_list & choices) {
    if (question.empty()) {
        throw invalid_input("new question is empty");
    }
    return "Q: " + format_question(question, choices) + "\n" + std::string(generation_cue);
}

} // namespace detail

inline std::string build_expert(const std::vector<exemplar> & exemplars, std::string_view question,
                                const choice_list & choices = {}, std::size_t shots = default_shots) {
    if (exemplars.size() != shots) {
        throw config_error("expert prompt needs exactly " + std::to_string(shots) + " exemplars, got " +
                           std::to_string(exemplars.size()));
    }
    std::string out;
    for (std::size_t i = 0; i < exemplars.size(); ++i) {
        const auto & e = exemplars[i];
        detail::check_exemplar(e, i, true, true);
        out += "Q: " + format_question(e.question, e.choices) + "\n";
        out += "A: " + e.cot + " " + e.answer + "\n";
    }
    return out + detail::final_block(question, choices);
}

inline std::string build_amateur(const amateur_variant & variant, const std::vector<exemplar> & exemplars,
                                 std::string_view question, const choice_list & choices = {},
                                 std::size_t shots = default_shots) {
    switch (variant.kind) {
        case amateur_kind::no_context:
            return std::string(generation_cue);

        case amateur_kind::answers_only: {
            if (exemplars.empty()) {
                throw config_error("answers_only amateur needs exemplars");
            }
            std::string out;
            for (std::size_t i = 0; i < exemplars.size(); ++i) {
                detail::check_exemplar(exemplars[i], i, false, false);
                out += "A: " + exemplars[i].answer + "\n";
            }
            return out + detail::final_block(question, choices);
        }

        case amateur_kind::no_cot: {
            if (exemplars.empty()) {
                throw config_error("no_cot amateur needs exemplars");
            }
            std::string out;
            for (std::size_t i = 0; i < exemplars.size(); ++i) {
                const auto & e = exemplars[i];
                detail::check_exemplar(e, i, true, false);
                out += "Q: " + format_question(e.question, e.choices) + "\n";
                out += "A: " + e.answer + "\n";
            }
            return out + detail::final_block(question, choices);
        }

        case amateur_kind::coherence_boost: {
            const std::string expert = build_expert(exemplars, question, choices, shots);
            std::size_t keep = variant.keep_last_chars.value_or(utf8_length(detail::final_block(question, choices)));
            if (keep == 0) {
                throw config_error("coherence_boost keep_last_chars must be > 0");
            }
            return utf8_suffix(expert, keep);
        }
    }
    throw config_error("unknown amateur variant");
}

inline prompt_bundle build_bundle(std::string id, const amateur_variant & variant,
                                  const std::vector<exemplar> & exemplars, std::string_view question,
                                  const choice_list & choices = {}, std::size_t shots = default_shots) {
    prompt_bundle b;
    b.question_id  = std::move(id);
    b.expert_text  = build_expert(exemplars, question, choices, shots);
    b.amateur_text = build_amateur(variant, exemplars, question, choices, shots);
    b.variant      = variant;
    return b;
}

inline choice_list parse_choices(const nlohmann::json & j) {
    choice_list out;
    for (const auto & c : j) {
        if (!c.is_array() || c.size() != 2) {
            throw invalid_input("choice must be a [label, text] pair");
        }
        out.push_back({ c.at(0).get<std::string>(), c.at(1).get<std::string>() });
    }
    return out;
}

inline nlohmann::json choices_to_json(const choice_list & choices) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto & c : choices) {
        j.push_back({ c.label, c.text });
    }
    return j;
}

inline nlohmann::json to_json(const exemplar & e) {
    nlohmann::json j = { { "question", e.question }, { "cot", e.cot }, { "answer", e.answer } };
    if (!e.choices.empty()) {
        j["choices"] = choices_to_json(e.choices);
    }
    return j;
}

// Exemplar JSONL: {"question": str, "cot": str, "answer": str, "choices": [[label, text], ...]?}
inline std::vector<exemplar> parse_exemplars(std::istream & in) {
    std::vector<exemplar> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception & e) {
            throw parse_error(std::string("invalid JSON: ") + e.what(), lineno);
        }
        if (!j.is_object()) {
            throw parse_error("exemplar must be a JSON object", lineno);
        }
        exemplar e;
        for (const char * field : { "question", "cot", "answer" }) {
            if (!j.contains(field) || !j[field].is_string()) {
                throw parse_error(std::string("exemplar is missing string field \"") + field + "\"", lineno);
            }
        }
        e.question = j["question"].get<std::string>();
        e.cot      = j["cot"].get<std::string>();
        e.answer   = j["answer"].get<std::string>();
        if (j.contains("choices")) {
            try {
                e.choices = parse_choices(j["choices"]);
            } catch (const std::exception & ex) {
                throw parse_error(std::string("invalid \"choices\": ") + ex.what(), lineno);
            }
        }
        out.push_back(std::move(e));
    }
    if (out.empty()) {
        throw config_error("exemplar file contains no exemplars");
    }
    return out;
}

inline std::vector<exemplar> load_exemplars(const std::string & path) {
    std::ifstream f(path);
    if (!f) {
        throw config_error("cannot open exemplar file " + path);
    }
    try {
        return parse_exemplars(f);
    } catch (const parse_error & e) {
        throw parse_error(path + ": " + e.what());
    }
}

// Order-sensitive content hash of an exemplar set.
inline std::string exemplar_set_hash(const std::vector<exemplar> & exemplars) {
    fnv1a h;
    for (const auto & e : exemplars) {
        h.field(to_json(e).dump());
    }
    return h.hex();
}

// Hash of the prompt layout for a variant, independent of exemplar content.
inline std::string prompt_template_hash(const std::optional<amateur_variant> & variant, std::size_t shots) {
    std::vector<exemplar> placeholders;
    for (std::size_t i = 0; i < shots; ++i) {
        const auto n = std::to_string(i + 1);
        placeholders.push_back({ "{question " + n + "}", "{CoT " + n + "}", "{answer " + n + "}", {} });
    }
    fnv1a h;
    h.field(build_expert(placeholders, "{new question}", {}, shots));
    if (variant) {
        h.field(build_amateur(*variant, placeholders, "{new question}", {}, shots));
        if (variant->keep_last_chars) {
            h.field(std::to_string(*variant->keep_last_chars));
        }
    }
    return h.hex();
}

} // namespace ccot
