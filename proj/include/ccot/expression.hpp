#pragma once

// Exact evaluation of the arithmetic that appears in model reasoning text,
// and detection of "<expr> = <number>" claims inside free text.
//
// Grammar (whitespace ignored):
//   expr   := term (('+' | '-' | '−') term)*
//   term   := factor (('*' | '×' | '/' | '÷') factor)*
//   factor := number | '(' expr ')' | ('-' | '−') factor
//   number := ['$'] digits [(',' ddd)*] ['.' digits]

#include "error.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ccot {

using rational = boost::multiprecision::cpp_rational;

enum class expr_token_kind { number, plus, minus, times, divide, lparen, rparen, equals, space, other };

struct expr_token {
    expr_token_kind kind;
    std::size_t     begin; // byte offsets into the source
    std::size_t     end;
    rational        value; // numbers only
};

namespace detail {

inline bool ascii_digit(char c) { return c >= '0' && c <= '9'; }

inline rational parse_decimal(std::string_view digits) {
    std::string num;
    std::size_t frac = 0;
    bool after_dot = false;
    for (char c : digits) {
        if (c == '.') {
            after_dot = true;
        } else if (ascii_digit(c)) {
            num += c;
            frac += after_dot ? 1 : 0;
        }
    }
    // a leading zero would make cpp_int read the digits as octal
    const auto nz = num.find_first_not_of('0');
    num = nz == std::string::npos ? "0" : num.substr(nz);
    boost::multiprecision::cpp_int n(num);
    boost::multiprecision::cpp_int d = 1;
    for (std::size_t i = 0; i < frac; ++i) {
        d *= 10;
    }
    return rational(n, d);
}

// Length of a number starting at text[i], 0 if none.
inline std::size_t number_length(std::string_view text, std::size_t i) {
    const std::size_t start = i;
    if (i < text.size() && text[i] == '$') {
        ++i;
    }
    if (i >= text.size() || !ascii_digit(text[i])) {
        return 0;
    }
    while (i < text.size() && ascii_digit(text[i])) {
        ++i;
    }
    while (i + 3 < text.size() && text[i] == ',' && ascii_digit(text[i + 1]) && ascii_digit(text[i + 2]) &&
           ascii_digit(text[i + 3]) && (i + 4 >= text.size() || !ascii_digit(text[i + 4]))) {
        i += 4;
    }
    if (i + 1 < text.size() && text[i] == '.' && ascii_digit(text[i + 1])) {
        ++i;
        while (i < text.size() && ascii_digit(text[i])) {
            ++i;
        }
    }
    return i - start;
}

} // namespace detail

inline std::vector<expr_token> lex_arithmetic(std::string_view text) {
    std::vector<expr_token> out;
    std::size_t i = 0;
    auto push = [&](expr_token_kind k, std::size_t len) {
        out.push_back({ k, i, i + len, {} });
        i += len;
    };
    while (i < text.size()) {
        const char c = text[i];
        if (std::size_t n = detail::number_length(text, i); n > 0) {
            out.push_back({ expr_token_kind::number, i, i + n, detail::parse_decimal(text.substr(i, n)) });
            i += n;
        } else if (c == '+') {
            push(expr_token_kind::plus, 1);
        } else if (c == '-') {
            push(expr_token_kind::minus, 1);
        } else if (c == '*') {
            push(expr_token_kind::times, 1);
        } else if (c == '/') {
            push(expr_token_kind::divide, 1);
        } else if (c == '(') {
            push(expr_token_kind::lparen, 1);
        } else if (c == ')') {
            push(expr_token_kind::rparen, 1);
        } else if (c == '=') {
            push(expr_token_kind::equals, 1);
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            push(expr_token_kind::space, 1);
        } else if (text.compare(i, 3, "\xE2\x88\x92") == 0) { // U+2212 minus sign
            push(expr_token_kind::minus, 3);
        } else if (text.compare(i, 2, "\xC3\x97") == 0) { // U+00D7 multiplication sign
            push(expr_token_kind::times, 2);
        } else if (text.compare(i, 2, "\xC3\xB7") == 0) { // U+00F7 division sign
            push(expr_token_kind::divide, 2);
        } else {
            push(expr_token_kind::other, 1);
        }
    }
    return out;
}

inline bool is_operator(expr_token_kind k) {
    return k == expr_token_kind::plus || k == expr_token_kind::minus || k == expr_token_kind::times ||
           k == expr_token_kind::divide;
}

inline bool is_arithmetic(expr_token_kind k) {
    return k == expr_token_kind::number || is_operator(k) || k == expr_token_kind::lparen ||
           k == expr_token_kind::rparen || k == expr_token_kind::space;
}

// Recursive descent over a token range; spaces are skipped.
class expression_parser {
public:
    expression_parser(const std::vector<expr_token> & tokens, std::size_t begin, std::size_t end)
        : toks_(tokens), pos_(begin), end_(end) {}

    // Evaluates the whole range; nullopt when it does not parse.
    // Throws division_by_zero.
    std::optional<rational> parse_all() {
        auto v = expr();
        skip_space();
        if (!v || pos_ != end_) {
            return std::nullopt;
        }
        return v;
    }

private:
    void skip_space() {
        while (pos_ < end_ && toks_[pos_].kind == expr_token_kind::space) {
            ++pos_;
        }
    }

    bool accept(expr_token_kind k) {
        skip_space();
        if (pos_ < end_ && toks_[pos_].kind == k) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::optional<rational> expr() {
        auto lhs = term();
        while (lhs) {
            if (accept(expr_token_kind::plus)) {
                auto rhs = term();
                if (!rhs) return std::nullopt;
                *lhs += *rhs;
            } else if (accept(expr_token_kind::minus)) {
                auto rhs = term();
                if (!rhs) return std::nullopt;
                *lhs -= *rhs;
            } else {
                break;
            }
        }
        return lhs;
    }

    std::optional<rational> term() {
        auto lhs = factor();
        while (lhs) {
            if (accept(expr_token_kind::times)) {
                auto rhs = factor();
                if (!rhs) return std::nullopt;
                *lhs *= *rhs;
            } else if (accept(expr_token_kind::divide)) {
                auto rhs = factor();
                if (!rhs) return std::nullopt;
                if (*rhs == 0) {
                    throw division_by_zero("division by zero in expression");
                }
                *lhs /= *rhs;
            } else {
                break;
            }
        }
        return lhs;
    }

    std::optional<rational> factor() {
        skip_space();
        if (pos_ >= end_) {
            return std::nullopt;
        }
        const auto & t = toks_[pos_];
        if (t.kind == expr_token_kind::number) {
            ++pos_;
            return t.value;
        }
        if (t.kind == expr_token_kind::minus) {
            ++pos_;
            auto v = factor();
            if (!v) return std::nullopt;
            return rational(-*v);
        }
        if (t.kind == expr_token_kind::lparen) {
            ++pos_;
            auto v = expr();
            if (!v || !accept(expr_token_kind::rparen)) {
                return std::nullopt;
            }
            return v;
        }
        return std::nullopt;
    }

    const std::vector<expr_token> & toks_;
    std::size_t                     pos_;
    std::size_t                     end_;
};

// Exact value of an arithmetic expression. Throws parse_error when the text
// is not an expression and division_by_zero.
inline rational eval_expression(std::string_view text) {
    const auto toks = lex_arithmetic(text);
    for (const auto & t : toks) {
        if (!is_arithmetic(t.kind)) {
            throw parse_error("not an arithmetic expression: '" + std::string(text) + "'");
        }
    }
    auto v = expression_parser(toks, 0, toks.size()).parse_all();
    if (!v) {
        throw parse_error("cannot parse expression '" + std::string(text) + "'");
    }
    return *v;
}

inline double to_double(const rational & r) {
    return r.convert_to<double>();
}

// Exact match, or within 1e-6 relative.
inline bool value_matches(const rational & computed, const rational & claimed) {
    if (computed == claimed) {
        return true;
    }
    const double a = to_double(computed);
    const double b = to_double(claimed);
    return std::abs(a - b) <= 1e-6 * std::max(std::abs(a), std::abs(b));
}

struct arith_expression {
    std::string lhs_text;
    rational    claimed_value;
    std::size_t span_begin = 0; // byte offsets of "<lhs> = <rhs>" in the source
    std::size_t span_end   = 0;
};

struct expression_scan {
    std::vector<arith_expression> expressions;
    // candidates with an operator before '=' that did not parse
    std::size_t                   unparseable = 0;
};

// Finds "<expr> = <number>" claims. The lhs is the longest parseable,
// operator-bearing run of arithmetic directly before '='. In a chain
// "a + b = c = d" every '=' yields one claim against the cumulative lhs
// "a + b".
inline expression_scan extract_expressions(std::string_view text) {
    const auto toks = lex_arithmetic(text);
    expression_scan out;

    std::size_t segment_begin = 0; // first token after the previous '='
    std::optional<std::size_t> chain_lhs; // index into out.expressions
    std::optional<std::size_t> chain_rhs_token;

    for (std::size_t k = 0; k < toks.size(); ++k) {
        if (toks[k].kind != expr_token_kind::equals) {
            continue;
        }

        // rhs: optional minus, then a number
        std::size_t r = k + 1;
        while (r < toks.size() && toks[r].kind == expr_token_kind::space) ++r;
        bool negative = false;
        if (r < toks.size() && toks[r].kind == expr_token_kind::minus) {
            negative = true;
            ++r;
        }
        const bool rhs_ok = r < toks.size() && toks[r].kind == expr_token_kind::number;

        // lhs: trailing arithmetic run of the current segment
        std::size_t run_end = k;
        while (run_end > segment_begin && toks[run_end - 1].kind == expr_token_kind::space) --run_end;
        std::size_t run_begin = run_end;
        while (run_begin > segment_begin && is_arithmetic(toks[run_begin - 1].kind)) --run_begin;

        bool has_op = false;
        for (std::size_t i = run_begin; i < run_end; ++i) {
            has_op = has_op || is_operator(toks[i].kind);
        }

        const std::size_t this_segment = segment_begin;
        segment_begin = k + 1;
        const auto prev_chain_lhs = chain_lhs;
        const auto prev_chain_rhs = chain_rhs_token;
        chain_lhs.reset();
        chain_rhs_token.reset();

        if (!rhs_ok) {
            continue;
        }
        rational claimed = negative ? rational(-toks[r].value) : toks[r].value;

        if (!has_op) {
            // "... = c = d": the segment is exactly the previous claim
            std::size_t b = this_segment;
            while (b < run_end && toks[b].kind == expr_token_kind::space) ++b;
            if (prev_chain_lhs && prev_chain_rhs && b == *prev_chain_rhs && run_end == b + 1) {
                arith_expression e = out.expressions[*prev_chain_lhs];
                e.claimed_value = std::move(claimed);
                e.span_end      = toks[r].end;
                out.expressions.push_back(std::move(e));
                chain_lhs       = prev_chain_lhs;
                chain_rhs_token = r;
            }
            continue;
        }

        bool found = false;
        for (std::size_t s = run_begin; s < run_end && !found; ++s) {
            if (toks[s].kind == expr_token_kind::space) {
                continue;
            }
            bool op_in_range = false;
            for (std::size_t i = s; i < run_end; ++i) {
                op_in_range = op_in_range || is_operator(toks[i].kind);
            }
            if (!op_in_range) {
                break;
            }
            bool parses = false;
            try {
                parses = expression_parser(toks, s, run_end).parse_all().has_value();
            } catch (const division_by_zero &) {
                parses = true; // well formed; judged later
            }
            if (parses) {
                arith_expression e;
                e.lhs_text      = std::string(text.substr(toks[s].begin, toks[run_end - 1].end - toks[s].begin));
                e.claimed_value = std::move(claimed);
                e.span_begin    = toks[s].begin;
                e.span_end      = toks[r].end;
                out.expressions.push_back(std::move(e));
                chain_lhs       = out.expressions.size() - 1;
                chain_rhs_token = negative ? std::nullopt : std::optional<std::size_t>(r);
                found           = true;
            }
        }
        if (!found) {
            ++out.unparseable;
        }
    }
    return out;
}

enum class expression_verdict { correct, incorrect, division_by_zero };

inline expression_verdict check_expression(const arith_expression & e) {
    try {
        return value_matches(eval_expression(e.lhs_text), e.claimed_value) ? expression_verdict::correct
                                                                             : expression_verdict::incorrect;
    } catch (const division_by_zero &) {
        return expression_verdict::division_by_zero;
    }
}

} // namespace ccot
