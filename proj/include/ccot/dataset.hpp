#pragma once

// Question-answering datasets and answer extraction/grading.

#include "error.hpp"
#include "prompt.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ccot {

enum class answer_type { numeric, choice };

inline std::string_view to_string(answer_type t) {
    return t == answer_type::numeric ? "NUMERIC" : "CHOICE";
}

inline answer_type parse_answer_type(std::string_view s) {
    if (s == "NUMERIC") return answer_type::numeric;
    if (s == "CHOICE")  return answer_type::choice;
    throw parse_error("unknown answer_type '" + std::string(s) + "'");
}

struct qa_record {
    std::string id;
    std::string question;
    choice_list choices;
    // number string for NUMERIC, lowercase label for CHOICE
    std::string gold;
    answer_type type = answer_type::numeric;

    bool operator==(const qa_record &) const = default;
};

enum class dataset_format { gsm8k_jsonl, aqua_json, csqa_jsonl, canonical_jsonl };

inline dataset_format parse_dataset_format(std::string_view s) {
    if (s == "gsm8k_jsonl")     return dataset_format::gsm8k_jsonl;
    if (s == "aqua_json")       return dataset_format::aqua_json;
    if (s == "csqa_jsonl")      return dataset_format::csqa_jsonl;
    if (s == "canonical_jsonl") return dataset_format::canonical_jsonl;
    throw config_error("unknown dataset format '" + std::string(s) +
                       "' (expected gsm8k_jsonl, aqua_json, csqa_jsonl or canonical_jsonl)");
}

inline std::string_view to_string(dataset_format f) {
    switch (f) {
        case dataset_format::gsm8k_jsonl:     return "gsm8k_jsonl";
        case dataset_format::aqua_json:       return "aqua_json";
        case dataset_format::csqa_jsonl:      return "csqa_jsonl";
        case dataset_format::canonical_jsonl: return "canonical_jsonl";
    }
    return "?";
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// ---------------------------------------------------------------------------
// numbers

inline bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

struct numeric_answer {
    double      value = 0.0;
    // digits as written, without grouping commas or currency sign
    std::string text;
};

namespace detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Scans one number starting at text[i] (digit or sign). Returns the end
// position and the normalized spelling.
inline std::size_t scan_number(std::string_view text, std::size_t i, std::string & out) {
    out.clear();
    if (text[i] == '-') {
        out += '-';
        ++i;
    }
    while (i < text.size() && is_digit(text[i])) {
        out += text[i++];
    }
    // thousands groups: ",ddd" not followed by another digit
    while (i + 3 < text.size() && text[i] == ',' && is_digit(text[i + 1]) && is_digit(text[i + 2]) &&
           is_digit(text[i + 3]) && (i + 4 >= text.size() || !is_digit(text[i + 4]))) {
        out.append(text.substr(i + 1, 3));
        i += 4;
    }
    if (i + 1 < text.size() && text[i] == '.' && is_digit(text[i + 1])) {
        out += '.';
        ++i;
        while (i < text.size() && is_digit(text[i])) {
            out += text[i++];
        }
    }
    return i;
}

inline bool starts_number(std::string_view text, std::size_t i) {
    if (is_digit(text[i])) {
        return i == 0 || !(is_digit(text[i - 1]) || text[i - 1] == '.' || text[i - 1] == ',');
    }
    if (text[i] == '-' && i + 1 < text.size() && is_digit(text[i + 1])) {
        // a minus after a word character is subtraction or a hyphen
        return i == 0 || !is_word_char(text[i - 1]);
    }
    return false;
}

} // namespace detail

// Parses a whole string as a number, tolerating "$", grouping commas and
// surrounding whitespace / trailing punctuation.
inline std::optional<numeric_answer> parse_number(std::string_view s) {
    std::string t;
    for (char c : s) {
        if (c != ',' && c != '$') {
            t += c;
        }
    }
    t = trim(t);
    while (!t.empty() && (t.back() == '.' || t.back() == '!' || t.back() == '?' || t.back() == ';' || t.back() == ':')) {
        t.pop_back();
    }
    if (t.empty()) {
        return std::nullopt;
    }
    std::size_t i = 0;
    if (t[0] == '-' || t[0] == '+') {
        ++i;
    }
    bool digits = false, dot = false;
    for (; i < t.size(); ++i) {
        if (detail::is_digit(t[i])) {
            digits = true;
        } else if (t[i] == '.' && !dot) {
            dot = true;
        } else {
            return std::nullopt;
        }
    }
    if (!digits) {
        return std::nullopt;
    }
    if (t[0] == '+') {
        t.erase(0, 1);
    }
    return numeric_answer{ std::strtod(t.c_str(), nullptr), t };
}

// Last number in the text: integers, decimals and negatives; grouping
// commas and "$" are ignored.
inline std::optional<numeric_answer> extract_numeric_answer(std::string_view text) {
    std::optional<numeric_answer> last;
    std::string buf;
    std::size_t i = 0;
    while (i < text.size()) {
        if (detail::starts_number(text, i)) {
            i = detail::scan_number(text, i, buf);
            last = numeric_answer{ std::strtod(buf.c_str(), nullptr), buf };
        } else {
            ++i;
        }
    }
    return last;
}

// ---------------------------------------------------------------------------
// choices

namespace detail {

inline std::optional<std::string> match_label(std::string_view lower_text, std::size_t pos,
                                              const std::vector<std::string> & labels) {
    for (const auto & l : labels) {
        if (lower_text.compare(pos, l.size(), l) == 0) {
            const std::size_t end = pos + l.size();
            if (end >= lower_text.size() || !is_word_char(lower_text[end])) {
                return l;
            }
        }
    }
    return std::nullopt;
}

} // namespace detail

// Priority: "answer is (x)" / "answer is x"; then the last standalone
// "(x)"; then a unique case-insensitive mention of one choice's full text.
inline std::optional<std::string> extract_choice_answer(std::string_view text, const choice_list & choices) {
    if (choices.empty()) {
        throw invalid_input("extract_choice_answer needs at least one choice");
    }
    std::vector<std::string> labels;
    for (const auto & c : choices) {
        labels.push_back(lowercase(c.label));
    }
    const std::string lower = lowercase(text);

    // rule 1
    std::optional<std::string> found;
    static constexpr std::string_view cue = "answer is";
    for (auto pos = lower.find(cue); pos != std::string::npos; pos = lower.find(cue, pos + 1)) {
        std::size_t p = pos + cue.size();
        while (p < lower.size() && (lower[p] == ' ' || lower[p] == ':')) {
            ++p;
        }
        if (p < lower.size() && lower[p] == '(') {
            if (auto l = detail::match_label(lower, p + 1, labels); l && lower.compare(p + 1 + l->size(), 1, ")") == 0) {
                found = l;
            }
        } else if (p < lower.size() && p > pos + cue.size()) {
            if (auto l = detail::match_label(lower, p, labels)) {
                found = l;
            }
        }
    }
    if (found) {
        return found;
    }

    // rule 2
    for (auto pos = lower.find('('); pos != std::string::npos; pos = lower.find('(', pos + 1)) {
        if (auto l = detail::match_label(lower, pos + 1, labels); l && lower.compare(pos + 1 + l->size(), 1, ")") == 0) {
            found = l;
        }
    }
    if (found) {
        return found;
    }

    // rule 3
    std::optional<std::string> unique;
    int hits = 0;
    for (std::size_t i = 0; i < choices.size(); ++i) {
        const auto needle = lowercase(trim(choices[i].text));
        if (!needle.empty() && lower.find(needle) != std::string::npos) {
            ++hits;
            unique = labels[i];
        }
    }
    return hits == 1 ? unique : std::nullopt;
}

// ---------------------------------------------------------------------------
// grading

// Extracted answer as stored in run files: the normalized number or label.
inline std::optional<std::string> extract_answer(const qa_record & r, std::string_view text) {
    if (r.type == answer_type::numeric) {
        if (auto n = extract_numeric_answer(text)) {
            return n->text;
        }
        return std::nullopt;
    }
    return extract_choice_answer(text, r.choices);
}

inline bool numbers_match(const numeric_answer & gold, double got) {
    const bool integral_gold = gold.text.find('.') == std::string::npos || gold.value == std::floor(gold.value);
    if (integral_gold) {
        return got == gold.value;
    }
    return std::abs(got - gold.value) <= 1e-6 * std::abs(gold.value);
}

inline bool grade(const qa_record & r, const std::optional<std::string> & extracted) {
    if (!extracted) {
        return false;
    }
    if (r.type == answer_type::choice) {
        return lowercase(*extracted) == lowercase(r.gold);
    }
    const auto gold = parse_number(r.gold);
    const auto got  = parse_number(*extracted);
    return gold && got && numbers_match(*gold, got->value);
}

inline bool grade(const qa_record & r, std::optional<double> extracted) {
    if (!extracted || r.type != answer_type::numeric) {
        return false;
    }
    const auto gold = parse_number(r.gold);
    return gold && numbers_match(*gold, *extracted);
}

// ---------------------------------------------------------------------------
// loading

inline void validate(const qa_record & r) {
    if (r.id.empty()) {
        throw parse_error("record has an empty id");
    }
    if (r.question.empty()) {
        throw parse_error("record " + r.id + " has an empty question");
    }
    if (r.type == answer_type::choice) {
        if (r.choices.size() < 2) {
            throw parse_error("record " + r.id + " needs at least two choices");
        }
        bool found = false;
        for (const auto & c : r.choices) {
            found = found || lowercase(c.label) == r.gold;
        }
        if (!found) {
            throw parse_error("record " + r.id + " gold '" + r.gold + "' is not a choice label");
        }
    } else if (!parse_number(r.gold)) {
        throw parse_error("record " + r.id + " gold '" + r.gold + "' is not a number");
    }
}

namespace detail {

inline qa_record from_gsm8k(const nlohmann::json & j, std::size_t index) {
    qa_record r;
    r.id       = j.contains("id") ? j["id"].get<std::string>() : "gsm8k-" + std::to_string(index);
    r.question = j.at("question").get<std::string>();
    const auto answer = j.at("answer").get<std::string>();
    const auto pos    = answer.rfind("####");
    if (pos == std::string::npos) {
        throw parse_error("GSM8K answer has no \"####\" marker");
    }
    const auto gold = parse_number(answer.substr(pos + 4));
    if (!gold) {
        throw parse_error("GSM8K answer after \"####\" is not a number");
    }
    r.gold = gold->text;
    r.type = answer_type::numeric;
    return r;
}

// AQuA: {"question", "options": ["A)21", ...], "rationale", "correct": "A"}
inline qa_record from_aqua(const nlohmann::json & j, std::size_t index) {
    qa_record r;
    r.id       = j.contains("id") ? j["id"].get<std::string>() : "aqua-" + std::to_string(index);
    r.question = j.at("question").get<std::string>();
    for (const auto & o : j.at("options")) {
        const auto s   = o.get<std::string>();
        const auto pos = s.find(')');
        if (pos == std::string::npos || pos == 0) {
            throw parse_error("AQuA option '" + s + "' is not of the form \"X)text\"");
        }
        r.choices.push_back({ lowercase(trim(s.substr(0, pos))), trim(s.substr(pos + 1)) });
    }
    r.gold = lowercase(trim(j.at("correct").get<std::string>()));
    r.type = answer_type::choice;
    return r;
}

// CommonsenseQA: {"id", "question": {"stem", "choices": [{"label","text"}]}, "answerKey"}
inline qa_record from_csqa(const nlohmann::json & j, std::size_t index) {
    qa_record r;
    r.id = j.contains("id") ? j["id"].get<std::string>() : "csqa-" + std::to_string(index);
    const auto & q = j.at("question");
    r.question     = q.at("stem").get<std::string>();
    for (const auto & c : q.at("choices")) {
        r.choices.push_back({ lowercase(c.at("label").get<std::string>()), c.at("text").get<std::string>() });
    }
    r.gold = lowercase(j.at("answerKey").get<std::string>());
    r.type = answer_type::choice;
    return r;
}

inline qa_record from_canonical(const nlohmann::json & j) {
    qa_record r;
    r.id       = j.at("id").get<std::string>();
    r.question = j.at("question").get<std::string>();
    if (j.contains("choices")) {
        r.choices = parse_choices(j["choices"]);
    }
    r.gold = j.at("gold").get<std::string>();
    r.type = parse_answer_type(j.at("answer_type").get<std::string>());
    if (r.type == answer_type::choice) {
        r.gold = lowercase(r.gold);
    }
    return r;
}

} // namespace detail

inline nlohmann::json to_json(const qa_record & r) {
    nlohmann::json j = { { "id", r.id }, { "question", r.question } };
    if (!r.choices.empty()) {
        j["choices"] = choices_to_json(r.choices);
    }
    j["gold"]        = r.gold;
    j["answer_type"] = to_string(r.type);
    return j;
}

inline std::vector<qa_record> parse_dataset(std::istream & in, dataset_format format) {
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string all = ss.str();

    std::vector<nlohmann::json> items;
    std::vector<std::size_t> lines;

    const auto first = all.find_first_not_of(" \t\r\n");
    if (format == dataset_format::aqua_json && first != std::string::npos && all[first] == '[') {
        // the public AQuA release is JSON lines; a single array is accepted too
        try {
            for (auto & item : nlohmann::json::parse(all)) {
                items.push_back(item);
                lines.push_back(0);
            }
        } catch (const nlohmann::json::exception & e) {
            throw parse_error(std::string("invalid JSON array: ") + e.what());
        }
    } else {
        std::istringstream is(all);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (trim(line).empty()) {
                continue;
            }
            try {
                items.push_back(nlohmann::json::parse(line));
            } catch (const nlohmann::json::exception & e) {
                throw parse_error(std::string("invalid JSON: ") + e.what(), lineno);
            }
            lines.push_back(lineno);
        }
    }

    std::vector<qa_record> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        try {
            qa_record r;
            switch (format) {
                case dataset_format::gsm8k_jsonl:     r = detail::from_gsm8k(items[i], i); break;
                case dataset_format::aqua_json:       r = detail::from_aqua(items[i], i); break;
                case dataset_format::csqa_jsonl:      r = detail::from_csqa(items[i], i); break;
                case dataset_format::canonical_jsonl: r = detail::from_canonical(items[i]); break;
            }
            validate(r);
            out.push_back(std::move(r));
        } catch (const parse_error & e) {
            throw parse_error(e.what(), lines[i]);
        } catch (const std::exception & e) {
            throw parse_error(std::string("malformed record: ") + e.what(), lines[i]);
        }
    }
    return out;
}

inline std::vector<qa_record> load_dataset(const std::string & path, dataset_format format) {
    std::ifstream f(path);
    if (!f) {
        throw config_error("cannot open dataset " + path);
    }
    try {
        return parse_dataset(f, format);
    } catch (const parse_error & e) {
        throw parse_error(path + ": " + e.what());
    }
}

inline void save_dataset(const std::vector<qa_record> & records, const std::string & path) {
    std::ofstream f(path);
    if (!f) {
        throw config_error("cannot write dataset " + path);
    }
    for (const auto & r : records) {
        f << to_json(r).dump() << "\n";
    }
}

} // namespace ccot
