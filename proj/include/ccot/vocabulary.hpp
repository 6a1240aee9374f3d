#pragma once

// Word-level vocabulary and tokenizer shared by the local backends.
//
// Text is split into: one token per whitespace character, maximal runs of
// ASCII alphanumerics (bytes >= 0x80 count as word characters so UTF-8
// words stay whole), and one token per remaining punctuation byte. The
// literal "</s>" is the end-of-sequence token. Concatenating the token
// strings reproduces the input whenever every piece is in the vocabulary.

#include "contrast.hpp"
#include "error.hpp"
#include "hash.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ccot {

using token_sequence = std::vector<token_id>;

struct vocab_info {
    std::size_t vocab_size = 0;
    token_id    eos_id     = 0;
    // identifies the id <-> string table; equal tables give equal hashes
    std::string table_hash;
};

inline constexpr std::string_view unk_token = "<unk>";
inline constexpr std::string_view eos_token = "</s>";

inline bool is_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
}

inline bool is_space_byte(unsigned char c) {
    return c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
}

// Splits text into token strings without consulting any vocabulary.
inline std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text.substr(i, eos_token.size()) == eos_token) {
            out.emplace_back(eos_token);
            i += eos_token.size();
            continue;
        }
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_word_byte(c)) {
            std::size_t j = i;
            while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) {
                ++j;
            }
            out.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            out.emplace_back(1, text[i]);
            ++i;
        }
    }
    return out;
}

class vocabulary {
public:
    // Always starts with <unk> (id 0) and </s> (id 1).
    vocabulary() {
        add(std::string(unk_token));
        add(std::string(eos_token));
    }

    explicit vocabulary(const std::vector<std::string> & tokens) : vocabulary() {
        for (const auto & t : tokens) {
            add(t);
        }
    }

    // Returns the id of t, inserting it if needed.
    token_id add(const std::string & t) {
        if (t.empty()) {
            throw invalid_input("empty token string");
        }
        auto it = ids_.find(t);
        if (it != ids_.end()) {
            return it->second;
        }
        const auto id = static_cast<token_id>(strings_.size());
        strings_.push_back(t);
        ids_.emplace(t, id);
        return id;
    }

    std::size_t size() const noexcept { return strings_.size(); }
    token_id unk_id() const noexcept { return 0; }
    token_id eos_id() const noexcept { return 1; }

    bool contains(std::string_view t) const { return ids_.count(std::string(t)) != 0; }

    token_id id_of(std::string_view t) const {
        auto it = ids_.find(std::string(t));
        return it == ids_.end() ? unk_id() : it->second;
    }

    const std::string & string_of(token_id id) const {
        check(id);
        return strings_[static_cast<std::size_t>(id)];
    }

    const std::vector<std::string> & strings() const noexcept { return strings_; }

    void check(token_id id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= strings_.size()) {
            throw invalid_token("token id " + std::to_string(id) + " outside vocabulary of size " +
                                std::to_string(strings_.size()));
        }
    }

    void check(std::span<const token_id> ids) const {
        for (token_id id : ids) {
            check(id);
        }
    }

    token_sequence tokenize(std::string_view text) const {
        token_sequence out;
        for (const auto & piece : split_words(text)) {
            out.push_back(id_of(piece));
        }
        return out;
    }

    std::string detokenize(std::span<const token_id> ids) const {
        std::string out;
        for (token_id id : ids) {
            out += string_of(id);
        }
        return out;
    }

    std::string table_hash() const {
        fnv1a h;
        for (const auto & s : strings_) {
            h.field(s);
        }
        return h.hex();
    }

    vocab_info info() const { return { size(), eos_id(), table_hash() }; }

    bool operator==(const vocabulary & o) const { return strings_ == o.strings_; }

    // Vocabulary used by the synthetic backend: whitespace, ASCII
    // punctuation, single letters, the integers 0..999 and a small set of
    // words common in arithmetic word problems.
    static vocabulary builtin() {
        vocabulary v;
        for (const char * ws : { " ", "\n", "\t" }) {
            v.add(ws);
        }
        for (int c = 33; c < 127; ++c) {
            if (!is_word_byte(static_cast<unsigned char>(c))) {
                v.add(std::string(1, static_cast<char>(c)));
            }
        }
        for (char c = 'A'; c <= 'Z'; ++c) {
            v.add(std::string(1, c));
        }
        for (char c = 'a'; c <= 'z'; ++c) {
            v.add(std::string(1, c));
        }
        for (int n = 0; n < 1000; ++n) {
            v.add(std::to_string(n));
        }
        static const char * words[] = {
            "the", "The", "answer", "is", "so", "So", "and", "of", "to", "in", "has", "have", "had",
            "he", "He", "she", "She", "they", "They", "it", "It", "each", "per", "day", "days", "total",
            "makes", "left", "more", "less", "than", "times", "plus", "minus", "divided", "by", "how",
            "How", "many", "much", "what", "What", "Therefore", "therefore", "dollars", "apples",
            "eggs", "hours", "minutes", "cost", "costs", "buys", "sells", "gives", "takes", "there",
            "There", "are", "was", "were", "a", "an", "for", "with", "on", "at", "from", "after",
            "before", "then", "Then", "which", "option", "choice", "correct", "because", "Because",
            "yes", "no", "Yes", "No", "true", "false",
        };
        for (const char * w : words) {
            v.add(w);
        }
        return v;
    }

private:
    std::vector<std::string>                  strings_;
    std::unordered_map<std::string, token_id> ids_;
};

} // namespace ccot
