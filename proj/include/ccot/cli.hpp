#pragma once

// Operator commands behind the `ccot` executable. Each command returns a
// process exit code and writes human readable output to the given stream.

#include "analysis.hpp"
#include "backend.hpp"
#include "decoder.hpp"
#include "harness.hpp"
#include "http.hpp"
#include "ngram.hpp"
#include "prompt.hpp"

#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace ccot {

// Declarative run configuration. Command-line flags override file values.
struct run_config {
    std::string                backend = "synthetic";
    // empty: the amateur shares the expert backend
    std::string                amateur_backend;
    std::uint64_t              seed = 0;
    std::string                dataset;
    std::string                format = "canonical_jsonl";
    std::string                exemplars;
    std::size_t                shots = default_shots;
    std::string                variant = "no_context";
    std::optional<std::size_t> keep_last_chars;
    std::vector<double>        alphas = { 0.8 };
    std::string                mode = "log_space";
    std::size_t                max_new_tokens = 512;
    std::vector<std::string>   stop_sequences = { "\nQ:" };
    std::size_t                workers = 1;
    std::string                out = "runs";
    std::optional<std::size_t> limit;
    // manifest timestamp override for reproducible files
    std::string                timestamp;

    static run_config from_json(const nlohmann::json & j) {
        static const std::set<std::string> known = {
            "backend", "amateur_backend", "seed", "dataset", "format", "exemplars", "shots", "variant",
            "keep_last_chars", "alphas", "mode", "max_new_tokens", "stop_sequences", "workers", "out", "limit",
            "timestamp",
        };
        if (!j.is_object()) {
            throw config_error("config must be a JSON object");
        }
        for (const auto & [k, v] : j.items()) {
            if (!known.count(k)) {
                throw config_error("unknown config key '" + k + "'");
            }
        }
        run_config c;
        try {
            if (j.contains("backend")) c.backend = j["backend"].get<std::string>();
            if (j.contains("amateur_backend")) c.amateur_backend = j["amateur_backend"].get<std::string>();
            if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
            if (j.contains("dataset")) c.dataset = j["dataset"].get<std::string>();
            if (j.contains("format")) c.format = j["format"].get<std::string>();
            if (j.contains("exemplars")) c.exemplars = j["exemplars"].get<std::string>();
            if (j.contains("shots")) c.shots = j["shots"].get<std::size_t>();
            if (j.contains("variant")) c.variant = j["variant"].get<std::string>();
            if (j.contains("keep_last_chars")) c.keep_last_chars = j["keep_last_chars"].get<std::size_t>();
            if (j.contains("alphas")) {
                c.alphas = j["alphas"].is_array() ? j["alphas"].get<std::vector<double>>()
                                                  : std::vector<double>{ j["alphas"].get<double>() };
            }
            if (j.contains("mode")) c.mode = j["mode"].get<std::string>();
            if (j.contains("max_new_tokens")) c.max_new_tokens = j["max_new_tokens"].get<std::size_t>();
            if (j.contains("stop_sequences")) c.stop_sequences = j["stop_sequences"].get<std::vector<std::string>>();
            if (j.contains("workers")) c.workers = j["workers"].get<std::size_t>();
            if (j.contains("out")) c.out = j["out"].get<std::string>();
            if (j.contains("limit")) c.limit = j["limit"].get<std::size_t>();
            if (j.contains("timestamp")) c.timestamp = j["timestamp"].get<std::string>();
        } catch (const nlohmann::json::exception & e) {
            throw config_error(std::string("bad config value: ") + e.what());
        }
        return c;
    }

    static run_config load(const std::string & path) {
        std::ifstream f(path);
        if (!f) {
            throw config_error("cannot open config " + path);
        }
        try {
            return from_json(nlohmann::json::parse(f));
        } catch (const nlohmann::json::parse_error & e) {
            throw config_error("config " + path + " is not valid JSON: " + e.what());
        }
    }

    void validate() const {
        for (double a : alphas) {
            if (!(a >= 0.0 && a <= 1.0)) {
                throw config_error("alpha " + format_alpha(a) + " is outside the allowed range [0, 1]");
            }
        }
        parse_combine_mode(mode);
        parse_method(variant, keep_last_chars);
        if (workers < 1) {
            throw config_error("workers must be >= 1");
        }
        if (keep_last_chars && *keep_last_chars == 0) {
            throw config_error("keep_last_chars must be > 0");
        }
    }

    generation_config generation(double alpha) const {
        generation_config g;
        g.max_new_tokens = max_new_tokens;
        g.stop_sequences = stop_sequences;
        g.contrast       = { alpha, parse_combine_mode(mode) };
        return g;
    }
};

// "synthetic" | "ngram:PATH" | "http:URL"
inline backend_ptr make_backend(const std::string & spec, std::uint64_t seed) {
    if (spec == "synthetic") {
        return std::make_shared<synthetic_backend>(synthetic_options{ seed });
    }
    if (spec.rfind("ngram:", 0) == 0) {
        auto model = std::make_shared<const ngram_model>(ngram_model::load(spec.substr(6)));
        return std::make_shared<ngram_backend>(std::move(model), "ngram:" + std::filesystem::path(spec.substr(6)).filename().string());
    }
    if (spec.rfind("http:", 0) == 0) {
        std::string url = spec.substr(5);
        if (url.rfind("//", 0) == 0) {
            url = "http:" + url;
        }
        return std::make_shared<http_backend>(url);
    }
    throw config_error("unknown backend '" + spec + "' (expected synthetic, ngram:PATH or http:URL)");
}

struct backend_pair {
    backend_ptr expert;
    backend_ptr amateur;
};

inline backend_pair make_backends(const run_config & cfg) {
    backend_pair p;
    p.expert  = make_backend(cfg.backend, cfg.seed);
    p.amateur = cfg.amateur_backend.empty() ? p.expert : make_backend(cfg.amateur_backend, cfg.seed);
    return p;
}

inline std::string dataset_stem(const std::string & path) {
    return std::filesystem::path(path).stem().string();
}

inline eval_spec make_spec(const run_config & cfg, double alpha) {
    if (cfg.dataset.empty()) {
        throw config_error("no dataset given (--dataset or \"dataset\" in the config)");
    }
    if (cfg.exemplars.empty()) {
        throw config_error("no exemplar file given (--exemplars or \"exemplars\" in the config)");
    }
    eval_spec s;
    s.dataset_name = dataset_stem(cfg.dataset);
    s.records      = load_dataset(cfg.dataset, parse_dataset_format(cfg.format));
    s.exemplars    = load_exemplars(cfg.exemplars);
    s.shots        = cfg.shots;
    s.method       = parse_method(cfg.variant, cfg.keep_last_chars);
    s.generation   = cfg.generation(alpha);
    return s;
}

inline void print_generation(std::ostream & os, const generation_record & rec, bool verbose) {
    os << rec.text << "\n";
    os << "stop_reason: " << to_string(rec.reason) << "  tokens: " << rec.tokens.size() << "\n";
    if (verbose) {
        os << "flipped steps: " << rec.flip_count() << "/" << rec.steps.size() << "\n";
        for (std::size_t i = 0; i < rec.steps.size(); ++i) {
            const auto & s = rec.steps[i];
            os << "  step " << i << ": expert=" << s.expert_top1 << " amateur=" << s.amateur_top1
               << " combined=" << s.combined_top1 << (s.flipped ? "  FLIP" : "") << "\n";
        }
    }
}

inline int cmd_generate(const run_config & cfg, const std::string & question, bool baseline, bool verbose,
                        std::ostream & os) {
    if (cfg.exemplars.empty()) {
        throw config_error("no exemplar file given (--exemplars or \"exemplars\" in the config)");
    }
    if (question.empty()) {
        throw config_error("--question is required");
    }
    const auto exemplars = load_exemplars(cfg.exemplars);
    const auto backends  = make_backends(cfg);
    const auto method    = baseline ? run_method{} : parse_method(cfg.variant, cfg.keep_last_chars);

    auto gen = cfg.generation(cfg.alphas.empty() ? 0.0 : cfg.alphas.front());
    gen.record_steps = verbose;

    const auto bundle = build_bundle("cli", method.value_or(amateur_variant{}), exemplars, question, {}, cfg.shots);
    const auto rec    = method ? generate(*backends.expert, *backends.amateur, bundle, gen)
                               : generate_baseline(*backends.expert, bundle, gen);
    print_generation(os, rec, verbose);
    if (!rec.complete) {
        os << "generation aborted: " << rec.error << "\n";
        return 2;
    }
    return 0;
}

inline constexpr int exit_incomplete = 3;

inline void print_incomplete(std::ostream & os, const run_result & r) {
    os << "run incomplete: " << r.rows.size() << "/" << r.question_count << " questions done (" << r.error
       << ")\nrerun the same command to resume\n";
}

inline int cmd_eval(const run_config & cfg, std::ostream & os, const std::atomic<bool> * cancel = nullptr) {
    if (cfg.alphas.size() != 1) {
        throw config_error("eval takes exactly one alpha; use sweep for several");
    }
    const auto spec     = make_spec(cfg, cfg.alphas.front());
    const auto backends = make_backends(cfg);
    const auto path     = (std::filesystem::path(cfg.out) / run_file_name(spec, cfg.alphas.front())).string();

    eval_options opts;
    opts.limit     = cfg.limit;
    opts.workers   = cfg.workers;
    opts.timestamp = cfg.timestamp;
    opts.cancel    = cancel;

    const auto res = run_eval(*backends.expert, *backends.amateur, spec, path, opts);
    os << "manifest " << res.manifest_hash << "\n";
    os << "run file " << path << "\n";
    if (!res.complete) {
        print_incomplete(os, res);
        return exit_incomplete;
    }
    if (res.generated == 0) {
        os << "all " << res.question_count << " questions already done; cached result\n";
    }
    os << "accuracy " << format_fixed(res.accuracy) << " (" << res.correct << "/" << res.rows.size() << ")\n";
    return 0;
}

inline int cmd_sweep(const run_config & cfg, std::ostream & os, const std::atomic<bool> * cancel = nullptr) {
    std::vector<double> alphas;
    for (double a : cfg.alphas) {
        if (std::find(alphas.begin(), alphas.end(), a) != alphas.end()) {
            os << "warning: duplicate alpha " << format_alpha(a) << " ignored\n";
            continue;
        }
        alphas.push_back(a);
    }
    auto spec = make_spec(cfg, alphas.empty() ? 0.0 : alphas.front());
    if (!spec.method) {
        throw config_error("sweep needs an amateur variant; the baseline has no alpha");
    }
    const auto backends = make_backends(cfg);

    eval_options opts;
    opts.limit     = cfg.limit;
    opts.workers   = cfg.workers;
    opts.timestamp = cfg.timestamp;
    opts.cancel    = cancel;

    const auto table = sweep_alpha(*backends.expert, *backends.amateur, spec, alphas, cfg.out, opts);
    for (const auto & r : table) {
        os << "alpha " << format_alpha(r.alpha) << " -> " << r.run_file << "\n";
    }

    const auto stem = "sweep_" + spec.dataset_name + "_" + lowercase(method_name(spec.method));
    std::filesystem::create_directories(cfg.out);
    std::ofstream(std::filesystem::path(cfg.out) / (stem + ".md")) << sweep_markdown(table);
    std::ofstream(std::filesystem::path(cfg.out) / (stem + ".csv")) << sweep_csv(table);
    os << sweep_markdown(table);

    if (table.size() != alphas.size() || !table.back().complete) {
        os << "sweep incomplete; rerun the same command to resume\n";
        return exit_incomplete;
    }
    return 0;
}

inline int cmd_analyze(const std::vector<std::string> & run_files, const std::string & out_dir, std::ostream & os) {
    if (run_files.empty()) {
        throw config_error("analyze needs at least one run file");
    }
    std::vector<analysis_report> reports;
    for (const auto & f : run_files) {
        reports.push_back(analyze_run(f));
    }
    std::filesystem::create_directories(out_dir);
    std::ofstream(std::filesystem::path(out_dir) / "analysis.csv") << report_csv(reports);
    std::ofstream(std::filesystem::path(out_dir) / "analysis.md") << report_markdown(reports);
    os << report_markdown(reports);
    return 0;
}

inline int cmd_train_ngram(const std::string & corpus_path, int order, double delta, const std::string & out,
                           std::ostream & os) {
    std::ifstream f(corpus_path, std::ios::binary);
    if (!f) {
        throw config_error("cannot open corpus " + corpus_path);
    }
    std::stringstream ss;
    ss << f.rdbuf();
    const auto model = ngram_model::train(ss.str(), order, delta);
    model.save(out);
    os << "trained order-" << order << " model: vocab " << model.vocab().size() << ", contexts "
       << model.counts().size() << " -> " << out << "\n";
    return 0;
}

} // namespace ccot
