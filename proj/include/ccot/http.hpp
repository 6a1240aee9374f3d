#pragma once

// Logit-server wire protocol: a client backend and a server that exposes
// any in-process backend.
//
//   GET  /v1/vocab       -> {"vocab_size": int, "eos_id": int}
//   POST /v1/score       {"tokens": [int]} -> {"logits": [float]}
//   POST /v1/tokenize    {"text": str}     -> {"tokens": [int]}
//   POST /v1/detokenize  {"tokens": [int]} -> {"text": str}
//
// 400 on malformed requests or invalid tokens, 503 when busy.

#include "backend.hpp"
#include "error.hpp"
#include "hash.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <mutex>
#include <string>
#include <thread>

namespace ccot {

struct http_options {
    int max_attempts   = 3;
    int retry_delay_ms = 200;
    int timeout_s      = 60;
};

class http_backend final : public scoring_backend {
public:
    // Connects, fetches the vocabulary and checks that scoring is
    // deterministic by scoring one probe twice.
    explicit http_backend(std::string url, http_options opts = {}) : url_(std::move(url)), opts_(opts), client_(url_) {
        client_.set_connection_timeout(opts_.timeout_s, 0);
        client_.set_read_timeout(opts_.timeout_s, 0);
        client_.set_write_timeout(opts_.timeout_s, 0);

        const auto j = request("GET", "/v1/vocab", nullptr);
        try {
            info_.vocab_size = j.at("vocab_size").get<std::size_t>();
            info_.eos_id     = j.at("eos_id").get<token_id>();
        } catch (const nlohmann::json::exception & e) {
            throw backend_unavailable("malformed /v1/vocab response from " + url_ + ": " + e.what());
        }
        if (info_.vocab_size < 2 || info_.eos_id < 0 || static_cast<std::size_t>(info_.eos_id) >= info_.vocab_size) {
            throw backend_unavailable("server " + url_ + " reported an invalid vocabulary");
        }
        // the protocol does not expose the token table
        info_.table_hash = fnv1a()
                               .field("http")
                               .field(std::to_string(info_.vocab_size))
                               .field(std::to_string(info_.eos_id))
                               .hex();

        const token_sequence probe{ info_.eos_id };
        if (score(probe) != score(probe)) {
            throw backend_unavailable("server " + url_ + " returned different logits for the same input; "
                                      "configure it for deterministic scoring");
        }
    }

    const vocab_info & vocab() const override { return info_; }

    logit_vector score(std::span<const token_id> tokens) const override {
        if (tokens.empty()) {
            throw invalid_input("cannot score an empty token sequence");
        }
        for (token_id t : tokens) {
            if (t < 0 || static_cast<std::size_t>(t) >= info_.vocab_size) {
                throw invalid_token("token id " + std::to_string(t) + " outside vocabulary of size " +
                                    std::to_string(info_.vocab_size));
            }
        }
        const nlohmann::json body = { { "tokens", token_sequence(tokens.begin(), tokens.end()) } };
        const auto j = request("POST", "/v1/score", &body);
        std::vector<double> logits;
        try {
            logits = j.at("logits").get<std::vector<double>>();
        } catch (const nlohmann::json::exception & e) {
            throw backend_unavailable("malformed /v1/score response from " + url_ + ": " + e.what());
        }
        if (logits.size() != info_.vocab_size) {
            throw vocab_mismatch("server returned " + std::to_string(logits.size()) + " logits, expected " +
                                 std::to_string(info_.vocab_size));
        }
        return logit_vector(std::move(logits));
    }

    token_sequence tokenize(std::string_view text) const override {
        const nlohmann::json body = { { "text", std::string(text) } };
        const auto j = request("POST", "/v1/tokenize", &body);
        try {
            return j.at("tokens").get<token_sequence>();
        } catch (const nlohmann::json::exception & e) {
            throw backend_unavailable("malformed /v1/tokenize response from " + url_ + ": " + e.what());
        }
    }

    std::string detokenize(std::span<const token_id> tokens) const override {
        const nlohmann::json body = { { "tokens", token_sequence(tokens.begin(), tokens.end()) } };
        const auto j = request("POST", "/v1/detokenize", &body);
        try {
            return j.at("text").get<std::string>();
        } catch (const nlohmann::json::exception & e) {
            throw backend_unavailable("malformed /v1/detokenize response from " + url_ + ": " + e.what());
        }
    }

    std::string descriptor() const override { return "http:" + url_; }

private:
    nlohmann::json request(const char * method, const char * path, const nlohmann::json * body) const {
        int last_status = 0;
        std::string last_error;
        for (int attempt = 1; attempt <= opts_.max_attempts; ++attempt) {
            httplib::Result res;
            {
                std::lock_guard<std::mutex> lock(mu_);
                if (body) {
                    res = client_.Post(path, body->dump(), "application/json");
                } else {
                    res = client_.Get(path);
                }
            }
            if (!res) {
                last_status = 0;
                last_error  = httplib::to_string(res.error());
            } else if (res->status == 200) {
                try {
                    return nlohmann::json::parse(res->body);
                } catch (const nlohmann::json::exception & e) {
                    throw backend_unavailable(std::string("unparseable response from ") + path + ": " + e.what(), 200,
                                              attempt);
                }
            } else if (res->status == 400) {
                throw invalid_token(std::string(method) + " " + path + " rejected: " + res->body);
            } else {
                last_status = res->status;
                last_error  = res->body;
            }
            if (attempt < opts_.max_attempts) {
                std::this_thread::sleep_for(std::chrono::milliseconds(opts_.retry_delay_ms * attempt));
            }
        }
        throw backend_unavailable(std::string(method) + " " + url_ + path + " failed after " +
                                      std::to_string(opts_.max_attempts) + " attempts: " + last_error,
                                  last_status, opts_.max_attempts, opts_.retry_delay_ms * opts_.max_attempts);
    }

    std::string              url_;
    http_options             opts_;
    mutable httplib::Client  client_;
    mutable std::mutex       mu_;
    vocab_info               info_;
};

// Serves a backend over the wire protocol.
class logit_server {
public:
    // max_in_flight == 0 means unlimited; beyond it requests get 503.
    explicit logit_server(backend_ptr backend, int max_in_flight = 0)
        : backend_(std::move(backend)), max_in_flight_(max_in_flight) {
        server_.Get("/v1/vocab", [this](const httplib::Request &, httplib::Response & res) {
            const auto & v = backend_->vocab();
            reply(res, 200, { { "vocab_size", v.vocab_size }, { "eos_id", v.eos_id } });
        });
        server_.Post("/v1/score", [this](const httplib::Request & req, httplib::Response & res) {
            handle(req, res, [this](const nlohmann::json & j) {
                const auto tokens = j.at("tokens").get<token_sequence>();
                return nlohmann::json{ { "logits", backend_->score(tokens).scores } };
            });
        });
        server_.Post("/v1/tokenize", [this](const httplib::Request & req, httplib::Response & res) {
            handle(req, res, [this](const nlohmann::json & j) {
                return nlohmann::json{ { "tokens", backend_->tokenize(j.at("text").get<std::string>()) } };
            });
        });
        server_.Post("/v1/detokenize", [this](const httplib::Request & req, httplib::Response & res) {
            handle(req, res, [this](const nlohmann::json & j) {
                const auto tokens = j.at("tokens").get<token_sequence>();
                const auto n      = backend_->vocab().vocab_size;
                for (token_id t : tokens) {
                    if (t < 0 || static_cast<std::size_t>(t) >= n) {
                        throw invalid_token("token id " + std::to_string(t) + " outside vocabulary");
                    }
                }
                return nlohmann::json{ { "text", backend_->detokenize(tokens) } };
            });
        });
    }

    // Binds and returns the port; port 0 picks a free one.
    int bind(const std::string & host, int port) {
        if (port == 0) {
            port = server_.bind_to_any_port(host);
            if (port < 0) {
                throw config_error("cannot bind " + host);
            }
        } else if (!server_.bind_to_port(host, port)) {
            throw config_error("cannot bind " + host + ":" + std::to_string(port));
        }
        return port;
    }

    // Blocks until stop().
    void serve() { server_.listen_after_bind(); }

    void stop() { server_.stop(); }
    void wait_until_ready() const { server_.wait_until_ready(); }

private:
    template <typename F>
    void handle(const httplib::Request & req, httplib::Response & res, F && fn) {
        struct in_flight_guard {
            std::atomic<int> & n;
            ~in_flight_guard() { --n; }
        };
        const int now = ++in_flight_;
        in_flight_guard guard{ in_flight_ };

        if (max_in_flight_ > 0 && now > max_in_flight_) {
            reply(res, 503, { { "error", "busy" } });
            return;
        }
        try {
            reply(res, 200, fn(nlohmann::json::parse(req.body)));
        } catch (const nlohmann::json::exception & e) {
            reply(res, 400, { { "error", std::string("malformed request: ") + e.what() } });
        } catch (const invalid_token & e) {
            reply(res, 400, { { "error", e.what() } });
        } catch (const invalid_input & e) {
            reply(res, 400, { { "error", e.what() } });
        } catch (const std::exception & e) {
            reply(res, 500, { { "error", e.what() } });
        }
    }

    static void reply(httplib::Response & res, int status, const nlohmann::json & j) {
        res.status = status;
        res.set_content(j.dump(), "application/json");
    }

    backend_ptr      backend_;
    int              max_in_flight_;
    std::atomic<int> in_flight_{ 0 };
    httplib::Server  server_;
};

} // namespace ccot
