#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ccot {

// Base for every error raised by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class invalid_input : public error {
public:
    using error::error;
};

// Non-finite logit or malformed score vector.
class invalid_logits : public error {
public:
    using error::error;
};

// Expert and amateur vectors (or backends) disagree on the vocabulary.
class vocab_mismatch : public error {
public:
    using error::error;
};

class division_by_zero : public error {
public:
    division_by_zero(const std::string & what, std::size_t index = 0)
        : error(what), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class invalid_token : public error {
public:
    using error::error;
};

// Remote scoring failed. Carries what a caller needs to decide on a retry.
class backend_unavailable : public error {
public:
    backend_unavailable(const std::string & what, int status = 0, int attempts = 1, int retry_after_ms = 0)
        : error(what), status_(status), attempts_(attempts), retry_after_ms_(retry_after_ms) {}

    int status() const noexcept { return status_; }
    int attempts() const noexcept { return attempts_; }
    int retry_after_ms() const noexcept { return retry_after_ms_; }

private:
    int status_;
    int attempts_;
    int retry_after_ms_;
};

class invalid_corpus : public error {
public:
    using error::error;
};

class config_error : public error {
public:
    using error::error;
};

class invalid_exemplar : public error {
public:
    using error::error;
};

// Malformed input file. line() is 1-based, 0 when not line oriented.
class parse_error : public error {
public:
    parse_error(const std::string & what, std::size_t line = 0)
        : error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Run file belongs to a different configuration.
class manifest_mismatch : public error {
public:
    using error::error;
};

} // namespace ccot
