#pragma once

// Evaluation runs: one generation per question, graded and streamed to a
// resumable JSONL run file.
//
// Run file layout: line 1 is the manifest, every further line one result
// row. A run is identified by the manifest hash; reopening a file with a
// different hash is refused, reopening with the same hash skips questions
// that already have a row.

#include "backend.hpp"
#include "dataset.hpp"
#include "decoder.hpp"
#include "error.hpp"
#include "hash.hpp"
#include "prompt.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>
#include <unordered_set>

namespace ccot {

// nullopt is the uncontrasted baseline.
using run_method = std::optional<amateur_variant>;

inline std::string method_name(const run_method & m) {
    if (!m) {
        return "BASELINE";
    }
    std::string s(to_string(m->kind));
    for (auto & c : s) {
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return s;
}

inline run_method parse_method(std::string_view s, std::optional<std::size_t> keep_last_chars = std::nullopt) {
    const auto lower = lowercase(s);
    if (lower == "baseline") {
        return std::nullopt;
    }
    amateur_variant v{ parse_amateur_kind(lower), std::nullopt };
    if (v.kind == amateur_kind::coherence_boost) {
        v.keep_last_chars = keep_last_chars;
    }
    return v;
}

// Shortest decimal spelling that reads back to the same double.
inline std::string format_alpha(double a) {
    char buf[32];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, a);
        if (std::strtod(buf, nullptr) == a) {
            break;
        }
    }
    return buf;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct run_manifest {
    std::string              dataset;
    std::string              dataset_hash;
    run_method               method;
    double                   alpha = 0.0; // 0 for the baseline
    combine_mode             mode  = combine_mode::log_space;
    std::string              backend;
    std::string              amateur_backend;
    std::string              exemplar_hash;
    std::string              template_hash;
    std::size_t              shots = default_shots;
    std::size_t              max_new_tokens = 512;
    std::vector<std::string> stop_sequences;
    std::string              timestamp;

    // Content identity: every field except the timestamp.
    nlohmann::json identity() const {
        nlohmann::json j = {
            { "format", "ccot-run-v1" },
            { "dataset", dataset },
            { "dataset_hash", dataset_hash },
            { "variant", method_name(method) },
            { "alpha", alpha },
            { "mode", to_string(mode) },
            { "backend", backend },
            { "amateur_backend", amateur_backend },
            { "exemplar_hash", exemplar_hash },
            { "template_hash", template_hash },
            { "shots", shots },
            { "max_new_tokens", max_new_tokens },
            { "stop_sequences", stop_sequences },
        };
        if (method && method->keep_last_chars) {
            j["keep_last_chars"] = *method->keep_last_chars;
        }
        return j;
    }

    std::string hash() const { return hash_hex(identity().dump()); }

    nlohmann::json to_json() const {
        auto j          = identity();
        j["timestamp"]  = timestamp;
        j["manifest_hash"] = hash();
        return j;
    }

    static run_manifest from_json(const nlohmann::json & j) {
        run_manifest m;
        m.dataset         = j.at("dataset").get<std::string>();
        m.dataset_hash    = j.at("dataset_hash").get<std::string>();
        std::optional<std::size_t> keep;
        if (j.contains("keep_last_chars")) {
            keep = j["keep_last_chars"].get<std::size_t>();
        }
        m.method          = parse_method(j.at("variant").get<std::string>(), keep);
        m.alpha           = j.at("alpha").get<double>();
        m.mode            = parse_combine_mode(j.at("mode").get<std::string>());
        m.backend         = j.at("backend").get<std::string>();
        m.amateur_backend = j.at("amateur_backend").get<std::string>();
        m.exemplar_hash   = j.at("exemplar_hash").get<std::string>();
        m.template_hash   = j.at("template_hash").get<std::string>();
        m.shots           = j.at("shots").get<std::size_t>();
        m.max_new_tokens  = j.at("max_new_tokens").get<std::size_t>();
        m.stop_sequences  = j.at("stop_sequences").get<std::vector<std::string>>();
        m.timestamp       = j.value("timestamp", "");
        return m;
    }
};

inline std::string dataset_hash(const std::vector<qa_record> & records) {
    fnv1a h;
    for (const auto & r : records) {
        h.field(to_json(r).dump());
    }
    return h.hex();
}

struct result_row {
    std::string                id;
    std::string                variant;
    double                     alpha = 0.0;
    std::string                text;
    std::optional<std::string> extracted;
    std::string                gold;
    answer_type                type = answer_type::numeric;
    choice_list                choices;
    bool                       correct = false;
    stop_reason                reason  = stop_reason::max_tokens;
    std::size_t                tokens_generated = 0;

    bool operator==(const result_row &) const = default;

    qa_record as_record() const { return { id, "-", choices, gold, type }; }

    nlohmann::json to_json() const {
        nlohmann::json j = {
            { "id", id },
            { "variant", variant },
            { "alpha", alpha },
            { "text", text },
            { "extracted", extracted ? nlohmann::json(*extracted) : nlohmann::json(nullptr) },
            { "gold", gold },
            { "answer_type", ccot::to_string(type) },
        };
        if (!choices.empty()) {
            j["choices"] = choices_to_json(choices);
        }
        j["correct"]          = correct;
        j["stop_reason"]      = ccot::to_string(reason);
        j["tokens_generated"] = tokens_generated;
        return j;
    }

    static result_row from_json(const nlohmann::json & j) {
        result_row r;
        r.id      = j.at("id").get<std::string>();
        r.variant = j.at("variant").get<std::string>();
        r.alpha   = j.at("alpha").get<double>();
        r.text    = j.at("text").get<std::string>();
        if (!j.at("extracted").is_null()) {
            r.extracted = j["extracted"].get<std::string>();
        }
        r.gold = j.at("gold").get<std::string>();
        r.type = parse_answer_type(j.at("answer_type").get<std::string>());
        if (j.contains("choices")) {
            r.choices = parse_choices(j["choices"]);
        }
        r.correct          = j.at("correct").get<bool>();
        r.reason           = parse_stop_reason(j.at("stop_reason").get<std::string>());
        r.tokens_generated = j.value("tokens_generated", std::size_t{ 0 });
        return r;
    }
};

struct run_file {
    nlohmann::json          manifest;
    std::vector<result_row> rows;
    // a torn final line (process killed mid-write) was ignored
    bool                    truncated_tail = false;
};

inline double accuracy_of(const std::vector<result_row> & rows) {
    if (rows.empty()) {
        return 0.0;
    }
    const auto n = std::count_if(rows.begin(), rows.end(), [](const result_row & r) { return r.correct; });
    return static_cast<double>(n) / static_cast<double>(rows.size());
}

inline run_file read_run_file(const std::string & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw config_error("cannot open run file " + path);
    }
    run_file out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const bool last = f.peek() == std::char_traits<char>::eof();
        const bool had_newline = !f.eof();
        if (trim(line).empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception & e) {
            if (last && !had_newline && lineno > 1) {
                out.truncated_tail = true;
                break;
            }
            throw parse_error(path + ": invalid JSON: " + e.what(), lineno);
        }
        if (lineno == 1) {
            if (!j.is_object() || !j.contains("manifest_hash")) {
                throw parse_error(path + ": first line is not a run manifest", 1);
            }
            out.manifest = std::move(j);
            continue;
        }
        try {
            out.rows.push_back(result_row::from_json(j));
        } catch (const std::exception & e) {
            throw parse_error(path + ": malformed result row: " + e.what(), lineno);
        }
    }
    if (out.manifest.is_null()) {
        throw parse_error(path + ": empty run file");
    }
    return out;
}

// Re-extracts and re-grades every row from its stored text.
inline std::vector<result_row> regrade(const std::vector<result_row> & rows) {
    std::vector<result_row> out = rows;
    for (auto & r : out) {
        const auto rec = r.as_record();
        r.extracted    = extract_answer(rec, r.text);
        r.correct      = grade(rec, r.extracted);
    }
    return out;
}

struct eval_spec {
    std::string            dataset_name;
    std::vector<qa_record> records;
    std::vector<exemplar>  exemplars;
    std::size_t            shots = default_shots;
    run_method             method;
    generation_config      generation;
};

struct eval_options {
    std::optional<std::size_t> limit;
    std::size_t                workers = 1;
    // manifest timestamp for new files; empty means now
    std::string                timestamp;
    // polled between questions; set to stop early
    const std::atomic<bool> *  cancel = nullptr;
    // called after each row is persisted
    std::function<void(const result_row &)> on_row;
};

struct run_result {
    run_manifest            manifest;
    std::string             manifest_hash;
    std::vector<result_row> rows; // in dataset order
    std::size_t             question_count = 0;
    std::size_t             correct        = 0;
    double                  accuracy       = 0.0;
    std::size_t             generated      = 0; // rows produced by this call
    bool                    complete       = false;
    std::string             error;
};

inline run_manifest make_manifest(const scoring_backend & expert, const scoring_backend * amateur,
                                  const eval_spec & spec, const std::string & timestamp) {
    run_manifest m;
    m.dataset         = spec.dataset_name;
    m.dataset_hash    = dataset_hash(spec.records);
    m.method          = spec.method;
    m.alpha           = spec.method ? spec.generation.contrast.alpha : 0.0;
    m.mode            = spec.generation.contrast.mode;
    m.backend         = expert.descriptor();
    m.amateur_backend = spec.method && amateur ? amateur->descriptor() : "";
    m.exemplar_hash   = exemplar_set_hash(spec.exemplars);
    m.template_hash   = prompt_template_hash(spec.method, spec.shots);
    m.shots           = spec.shots;
    m.max_new_tokens  = spec.generation.max_new_tokens;
    m.stop_sequences  = spec.generation.stop_sequences;
    m.timestamp       = timestamp.empty() ? utc_timestamp() : timestamp;
    return m;
}

namespace detail {

// Writes rows in dataset order even when workers finish out of order.
class ordered_appender {
public:
    ordered_appender(std::ofstream & out, std::size_t count, std::function<void(const result_row &)> on_row)
        : out_(out), pending_(count), on_row_(std::move(on_row)) {}

    void submit(std::size_t index, result_row row) {
        std::lock_guard<std::mutex> lock(mu_);
        pending_[index] = std::move(row);
        while (next_ < pending_.size() && pending_[next_]) {
            out_ << pending_[next_]->to_json().dump() << "\n";
            out_.flush();
            if (on_row_) {
                on_row_(*pending_[next_]);
            }
            written_.push_back(std::move(*pending_[next_]));
            pending_[next_].reset();
            ++next_;
        }
    }

    std::vector<result_row> take_written() { return std::move(written_); }

private:
    std::ofstream &                          out_;
    std::vector<std::optional<result_row>>   pending_;
    std::size_t                              next_ = 0;
    std::vector<result_row>                  written_;
    std::function<void(const result_row &)>  on_row_;
    std::mutex                               mu_;
};

} // namespace detail

// Runs (or resumes) one evaluation. Rows are flushed as they complete; a
// result with complete == false can be finished by calling again with the
// same arguments.
inline run_result run_eval(const scoring_backend & expert, const scoring_backend & amateur, const eval_spec & spec,
                           const std::string & out_path, const eval_options & opts = {}) {
    spec.generation.validate();
    if (spec.method) {
        check_vocab_compatible(expert, amateur);
    }
    if (spec.records.empty()) {
        throw config_error("dataset " + spec.dataset_name + " is empty");
    }
    if (opts.workers < 1) {
        throw config_error("workers must be >= 1");
    }

    run_result res;
    res.manifest      = make_manifest(expert, &amateur, spec, opts.timestamp);
    res.manifest_hash = res.manifest.hash();

    std::vector<result_row> existing;
    const bool resume = std::filesystem::exists(out_path) && std::filesystem::file_size(out_path) > 0;
    if (resume) {
        auto rf = read_run_file(out_path);
        const auto stored = rf.manifest.value("manifest_hash", "");
        if (stored != res.manifest_hash) {
            throw manifest_mismatch("run file " + out_path + " has manifest " + stored + " but this configuration is " +
                                    res.manifest_hash + "; refusing to mix results");
        }
        res.manifest.timestamp = rf.manifest.value("timestamp", "");
        existing               = std::move(rf.rows);
        if (rf.truncated_tail) {
            // rewrite without the torn line
            std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
            f << rf.manifest.dump() << "\n";
            for (const auto & r : existing) {
                f << r.to_json().dump() << "\n";
            }
        }
    } else {
        if (auto dir = std::filesystem::path(out_path).parent_path(); !dir.empty()) {
            std::filesystem::create_directories(dir);
        }
        std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw config_error("cannot write run file " + out_path);
        }
        f << res.manifest.to_json().dump() << "\n";
    }

    const std::size_t n = opts.limit ? std::min(*opts.limit, spec.records.size()) : spec.records.size();
    res.question_count  = n;

    std::unordered_set<std::string> done;
    for (const auto & r : existing) {
        done.insert(r.id);
    }
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < n; ++i) {
        if (!done.count(spec.records[i].id)) {
            todo.push_back(i);
        }
    }

    std::ofstream out(out_path, std::ios::binary | std::ios::app);
    if (!out) {
        throw config_error("cannot append to run file " + out_path);
    }
    detail::ordered_appender appender(out, todo.size(), opts.on_row);

    std::atomic<std::size_t> next{ 0 };
    std::atomic<bool>        abort{ false };
    std::mutex               err_mu;
    std::string              first_error;
    std::exception_ptr       fatal;

    auto worker = [&] {
        while (!abort.load()) {
            if (opts.cancel && opts.cancel->load()) {
                return;
            }
            const std::size_t k = next.fetch_add(1);
            if (k >= todo.size()) {
                return;
            }
            const auto & rec = spec.records[todo[k]];
            try {
                const amateur_variant shape = spec.method.value_or(amateur_variant{});
                const auto bundle = build_bundle(rec.id, shape, spec.exemplars, rec.question, rec.choices, spec.shots);
                const auto gen    = spec.method ? generate(expert, amateur, bundle, spec.generation)
                                                : generate_baseline(expert, bundle, spec.generation);
                if (!gen.complete) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (first_error.empty()) {
                        first_error = "question " + rec.id + ": " + gen.error;
                    }
                    abort = true;
                    return;
                }
                result_row row;
                row.id               = rec.id;
                row.variant          = method_name(spec.method);
                row.alpha            = res.manifest.alpha;
                row.text             = gen.text;
                row.extracted        = extract_answer(rec, gen.text);
                row.gold             = rec.gold;
                row.type             = rec.type;
                row.choices          = rec.choices;
                row.correct          = grade(rec, row.extracted);
                row.reason           = gen.reason;
                row.tokens_generated = gen.tokens.size();
                appender.submit(k, std::move(row));
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!fatal) {
                    fatal = std::current_exception();
                }
                abort = true;
                return;
            }
        }
    };

    const std::size_t nthreads = std::min(opts.workers, std::max<std::size_t>(todo.size(), 1));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nthreads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto & th : pool) {
            th.join();
        }
    }
    out.flush();
    if (fatal) {
        std::rethrow_exception(fatal);
    }

    auto fresh    = appender.take_written();
    res.generated = fresh.size();

    // rows for the selected questions, in dataset order
    std::map<std::string, result_row> by_id;
    for (auto & r : existing) {
        by_id.emplace(r.id, std::move(r));
    }
    for (auto & r : fresh) {
        by_id.emplace(r.id, std::move(r));
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto it = by_id.find(spec.records[i].id);
        if (it != by_id.end()) {
            res.rows.push_back(it->second);
        }
    }
    res.correct  = static_cast<std::size_t>(std::count_if(res.rows.begin(), res.rows.end(), [](const result_row & r) { return r.correct; }));
    res.accuracy = accuracy_of(res.rows);
    res.complete = res.rows.size() == n;
    if (!res.complete) {
        res.error = first_error.empty() ? "interrupted after " + std::to_string(res.rows.size()) + " of " +
                                              std::to_string(n) + " questions"
                                        : first_error;
    }
    return res;
}

struct sweep_row {
    double      alpha    = 0.0;
    double      accuracy = 0.0;
    std::size_t questions = 0;
    std::string run_file;
    bool        complete = false;
};

inline std::string run_file_name(const eval_spec & spec, double alpha) {
    std::string name = spec.dataset_name + "_" + lowercase(method_name(spec.method));
    if (spec.method) {
        name += "_alpha" + format_alpha(alpha);
    }
    return name + ".jsonl";
}

// One run per alpha, in the order given. Stops at the first incomplete run.
inline std::vector<sweep_row> sweep_alpha(const scoring_backend & expert, const scoring_backend & amateur,
                                          eval_spec spec, const std::vector<double> & alphas,
                                          const std::string & out_dir, const eval_options & opts = {}) {
    if (alphas.empty()) {
        throw config_error("sweep needs at least one alpha");
    }
    for (double a : alphas) {
        contrast_config{ a, spec.generation.contrast.mode }.validate();
    }
    std::vector<sweep_row> table;
    for (double a : alphas) {
        spec.generation.contrast.alpha = a;
        const auto path = (std::filesystem::path(out_dir) / run_file_name(spec, a)).string();
        const auto res  = run_eval(expert, amateur, spec, path, opts);
        table.push_back({ a, res.accuracy, res.rows.size(), path, res.complete });
        if (!res.complete) {
            break;
        }
    }
    return table;
}

inline std::string sweep_markdown(const std::vector<sweep_row> & rows) {
    std::string out = "| α | Accuracy |\n|---|---|\n";
    char buf[64];
    for (const auto & r : rows) {
        std::snprintf(buf, sizeof(buf), "| %s | %.3f |\n", format_alpha(r.alpha).c_str(), r.accuracy);
        out += buf;
    }
    return out;
}

inline std::string sweep_csv(const std::vector<sweep_row> & rows) {
    std::string out = "alpha,accuracy\n";
    char buf[64];
    for (const auto & r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.3f\n", format_alpha(r.alpha).c_str(), r.accuracy);
        out += buf;
    }
    return out;
}

} // namespace ccot
