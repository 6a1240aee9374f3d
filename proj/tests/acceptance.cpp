// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion and exits
// non-zero when any criterion fails.

#include "random_expression.hpp"
#include "shunting_yard.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cstring>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

using namespace ccot;
using namespace ccot_test;

namespace {

struct outcome {
    bool        pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------

outcome combiner_matches_oracle() {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> size(2, 64);
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    int pairs = 0;
    for (double alpha : { 0.0, 0.3, 0.5, 0.8, 1.0 }) {
        for (int i = 0; i < 1000; ++i, ++pairs) {
            const std::size_t n = size(rng);
            const auto e = random_logits(rng, n);
            const auto a = random_logits(rng, n);
            const auto got  = softmax(combine_logits(logit_vector(e), logit_vector(a), { alpha, combine_mode::log_space }));
            const auto want = ratio_oracle(e, a, alpha);
            for (std::size_t k = 0; k < n; ++k) {
                worst = std::max(worst, std::abs(got[k] - want[k]));
            }
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d pairs, max |diff| %.2e (tol 1e-9), %.3f s (limit 1 s)", pairs, worst, secs);
    return { worst <= 1e-9 && secs < 1.0, buf };
}

outcome alpha_zero_equals_baseline() {
    synthetic_backend be(synthetic_options{ 2 });
    const auto exemplars = load_exemplars(fixture("exemplars.jsonl"));
    std::mt19937_64 rng(2);
    generation_config cfg;
    cfg.max_new_tokens = 32;
    cfg.contrast.alpha = 0.0;
    int same = 0;
    for (int i = 0; i < 50; ++i) {
        const auto q = "Sam has " + std::to_string(rng() % 100) + " apples and buys " + std::to_string(rng() % 100) +
                       " more. How many apples does Sam have?";
        const auto kind = static_cast<amateur_kind>(i % 4);
        const auto b = build_bundle("p" + std::to_string(i), { kind, {} }, exemplars, q);
        if (generate(be, be, b, cfg).tokens == generate_baseline(be, b, cfg).tokens) ++same;
    }
    return { same == 50, std::to_string(same) + "/50 prompts produced identical token sequences" };
}

outcome ngram_flip() {
    const auto model = flip_model();
    ngram_backend be(model);
    const auto & v = model->vocab();

    // brute-force counts straight from the corpus tokens
    token_sequence toks;
    for (const auto & p : split_words(flip_corpus())) toks.push_back(v.id_of(p));
    auto logits_after = [&](const token_sequence & ctx) {
        std::map<token_id, double> next;
        double total = 0;
        for (std::size_t i = 0; i + ctx.size() < toks.size(); ++i) {
            if (std::equal(ctx.begin(), ctx.end(), toks.begin() + static_cast<long>(i))) {
                next[toks[i + ctx.size()]] += 1;
                total += 1;
            }
        }
        const double V = static_cast<double>(v.size());
        std::vector<double> out(v.size());
        for (std::size_t t = 0; t < out.size(); ++t) {
            out[t] = std::log((next[static_cast<token_id>(t)] + 1.0) / (total + V));
        }
        return out;
    };
    const auto e = logits_after(v.tokenize("\nA: "));
    const auto a = logits_after(v.tokenize("A: "));
    auto argmax = [](const std::vector<double> & x) {
        return static_cast<token_id>(std::max_element(x.begin(), x.end()) - x.begin());
    };
    std::vector<double> c(e.size());
    for (std::size_t t = 0; t < c.size(); ++t) c[t] = 1.8 * e[t] - 0.8 * a[t];
    const bool oracle_flips = argmax(e) == v.id_of("x") && argmax(c) == v.id_of("y");

    generation_config cfg;
    cfg.max_new_tokens = 1;
    cfg.contrast.alpha = 0.8;
    const auto b    = flip_bundle();
    const auto base = generate_baseline(be, b, cfg).text;
    const auto flip = generate(be, be, b, cfg).text;
    cfg.contrast.alpha = 0.0;
    const auto zero = generate(be, be, b, cfg).text;
    return { oracle_flips && base == "x" && zero == "x" && flip == "y",
             "brute force expert/contrast argmax " + v.string_of(argmax(e)) + "/" + v.string_of(argmax(c)) +
                 "; decoder baseline '" + base + "', alpha 0 '" + zero + "', alpha 0.8 '" + flip + "'" };
}

outcome ngram_exact() {
    std::mt19937_64 rng(4);
    const std::vector<std::string> words = { "the", "cat", "sat", "on", "mat", "3", "+", "4", "=", "7", "so", "answer", "is" };
    std::string corpus;
    std::size_t ntok = 0;
    while (ntok < 10000) {
        corpus += words[rng() % words.size()];
        corpus += (rng() % 7 == 0) ? "\n" : " ";
        ntok += 2;
    }
    double worst = 0.0;
    std::size_t contexts = 0;
    for (int order = 1; order <= 3; ++order) {
        const auto m = ngram_model::train(corpus, order, 0.5);
        const auto & v = m.vocab();
        token_sequence toks;
        for (const auto & p : split_words(corpus)) toks.push_back(v.id_of(p));

        // independent tally: every context length 0..order-1 at every position
        std::map<token_sequence, std::map<token_id, double>> table;
        std::map<token_sequence, double> totals;
        const std::size_t clen = static_cast<std::size_t>(order - 1);
        for (std::size_t i = 0; i < toks.size(); ++i) {
            for (std::size_t len = 0; len <= std::min(clen, i); ++len) {
                const token_sequence ctx(toks.begin() + static_cast<long>(i - len), toks.begin() + static_cast<long>(i));
                table[ctx][toks[i]] += 1;
                totals[ctx] += 1;
            }
        }
        const double V = static_cast<double>(v.size());
        for (const auto & [ctx, next] : table) {
            // a query of exactly this length selects this context
            const auto s = m.score(ctx);
            for (std::size_t t = 0; t < v.size(); ++t) {
                auto it = next.find(static_cast<token_id>(t));
                const double c = it == next.end() ? 0.0 : it->second;
                worst = std::max(worst, std::abs(s[t] - std::log((c + 0.5) / (totals[ctx] + 0.5 * V))));
            }
            ++contexts;
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu contexts over orders 1-3, max |diff| %.2e (tol 1e-12)", contexts, worst);
    return { worst <= 1e-12 && contexts > 0, buf };
}

outcome prompt_goldens() {
    const auto ex = load_exemplars(fixture("exemplars.jsonl"));
    const auto q  = new_question();
    std::vector<std::pair<std::string, std::string>> cases = {
        { "expert.txt", build_expert(ex, q) },
        { "no_context.txt", build_amateur({ amateur_kind::no_context, {} }, ex, q) },
        { "answers_only.txt", build_amateur({ amateur_kind::answers_only, {} }, ex, q) },
        { "no_cot.txt", build_amateur({ amateur_kind::no_cot, {} }, ex, q) },
        { "coherence_boost.txt", build_amateur({ amateur_kind::coherence_boost, {} }, ex, q) },
        { "coherence_boost_40.txt", build_amateur({ amateur_kind::coherence_boost, 40 }, ex, q) },
    };
    const choice_list choices = {
        { "A", "maine" }, { "B", "boston" }, { "C", "beach town" }, { "D", "coastal cities" }, { "E", "ocean" },
    };
    cases.push_back({ "expert_choices.txt",
                      build_expert(load_exemplars(fixture("exemplars_mc.jsonl")),
                                   "Where would you find a seafood restaurant in the east coast of North America?",
                                   choices, 2) });
    std::string bad;
    for (const auto & [file, text] : cases) {
        if (read_file(golden(file)) != text) bad += " " + file;
    }
    return { bad.empty(), bad.empty() ? std::to_string(cases.size()) + " goldens identical" : "mismatch:" + bad };
}

outcome expressions_exact() {
    std::mt19937_64 rng(6);
    int agree = 0, total = 0;
    for (int i = 0; i < 500; ++i, ++total) {
        const auto expr = random_expression(rng);
        try {
            const auto want = oracle::evaluate(expr);
            try {
                agree += eval_expression(expr) == want;
            } catch (const std::exception &) {
            }
        } catch (const oracle::div_by_zero &) {
            try {
                eval_expression(expr);
            } catch (const division_by_zero &) {
                ++agree;
            }
        }
    }
    auto verdict = [](const std::string & text) {
        const auto scan = extract_expressions(text);
        return scan.expressions.size() == 1 ? std::optional(check_expression(scan.expressions[0])) : std::nullopt;
    };
    const bool wrong = verdict("5 + 3 * 2 = 16") == expression_verdict::incorrect;
    const bool right = verdict("(5+3)*2 = 16") == expression_verdict::correct;
    return { agree == total && wrong && right,
             std::to_string(agree) + "/" + std::to_string(total) + " agree with the shunting-yard oracle; '5 + 3 * 2 = 16' " +
                 (wrong ? "incorrect" : "NOT incorrect") + ", '(5+3)*2 = 16' " + (right ? "correct" : "NOT correct") };
}

outcome extraction_cases() {
    std::ifstream f(fixture("extraction_cases.jsonl"));
    std::string line, bad;
    int n = 0, ok = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        ++n;
        const auto j = nlohmann::json::parse(line);
        qa_record r{ "c", "q", {}, j["gold"].get<std::string>(), parse_answer_type(j["answer_type"].get<std::string>()) };
        if (j.contains("choices")) r.choices = parse_choices(j["choices"]);
        const auto got = extract_answer(r, j["text"].get<std::string>());
        const std::optional<std::string> want =
            j["expected_extracted"].is_null() ? std::nullopt : std::optional(j["expected_extracted"].get<std::string>());
        if (got == want && grade(r, got) == j["expected_correct"].get<bool>()) {
            ++ok;
        } else {
            bad += " #" + std::to_string(n);
        }
    }
    return { n == 25 && ok == n, std::to_string(ok) + "/" + std::to_string(n) + " hand labels matched" + bad };
}

eval_spec arith_spec() {
    eval_spec s;
    s.dataset_name = "arith";
    s.records      = load_dataset(fixture("arith_dataset.jsonl"), dataset_format::canonical_jsonl);
    s.exemplars    = load_exemplars(fixture("exemplars.jsonl"));
    s.method       = amateur_variant{ amateur_kind::no_context, {} };
    s.generation.max_new_tokens = 16;
    s.generation.contrast.alpha = 0.8;
    return s;
}

outcome resumability() {
    synthetic_backend be(synthetic_options{ 8 });
    const auto dir = scratch_dir("acceptance_resume");
    eval_options opts;
    opts.timestamp = "2024-01-01T00:00:00Z";

    const auto full = (dir / "full.jsonl").string();
    run_eval(be, be, arith_spec(), full, opts);

    // backend dies part way through; at least one question is already written
    const auto path = (dir / "resumed.jsonl").string();
    failing_backend flaky(be, 100);
    const auto partial = run_eval(flaky, flaky, arith_spec(), path, opts);
    const auto resumed = run_eval(be, be, arith_spec(), path, opts);
    const bool same = read_file(path) == read_file(full);
    return { !partial.complete && partial.rows.size() > 0 && resumed.complete && same &&
                 resumed.generated == 12 - partial.rows.size(),
             "interrupted after " + std::to_string(partial.rows.size()) + "/12, resumed " +
                 std::to_string(resumed.generated) + " more; file " + (same ? "identical to" : "DIFFERS from") +
                 " an uninterrupted run" };
}

// Starts `ccot serve-mock` and returns its pid and URL.
std::pair<pid_t, std::string> start_mock(std::uint64_t seed) {
    int fds[2];
    if (pipe(fds) != 0) return { -1, "" };
    const pid_t pid = fork();
    if (pid == 0) {
        dup2(fds[1], STDOUT_FILENO);
        close(fds[0]);
        close(fds[1]);
        const auto s = std::to_string(seed);
        execl(CCOT_CLI_PATH, CCOT_CLI_PATH, "serve-mock", "--port", "0", "--seed", s.c_str(), static_cast<char *>(nullptr));
        _exit(127);
    }
    close(fds[1]);
    std::string line;
    char c;
    while (read(fds[0], &c, 1) == 1 && c != '\n') line += c;
    close(fds[0]);
    const auto pos = line.find("http://");
    return { pid, pos == std::string::npos ? "" : line.substr(pos) };
}

outcome http_bitwise() {
    const auto [pid, url] = start_mock(9);
    if (pid < 0 || url.empty()) {
        if (pid > 0) kill(pid, SIGTERM);
        return { false, "serve-mock did not start" };
    }
    outcome out;
    try {
        http_backend remote(url);
        synthetic_backend local(synthetic_options{ 9 });
        std::mt19937_64 rng(9);
        int equal = 0;
        for (int i = 0; i < 100; ++i) {
            token_sequence seq(1 + rng() % 40);
            for (auto & t : seq) t = static_cast<token_id>(rng() % local.vocab().vocab_size);
            const auto r = remote.score(seq), l = local.score(seq);
            bool bitwise = r.size() == l.size();
            for (std::size_t k = 0; bitwise && k < r.size(); ++k) {
                bitwise = std::memcmp(&r.scores[k], &l.scores[k], sizeof(double)) == 0;
            }
            equal += bitwise;
        }
        out = { equal == 100, std::to_string(equal) + "/100 sequences bitwise equal over " + url };
    } catch (const std::exception & e) {
        out = { false, std::string("client error: ") + e.what() };
    }
    kill(pid, SIGTERM);
    int status = 0;
    waitpid(pid, &status, 0);
    return out;
}

outcome report_shapes() {
    synthetic_backend be(synthetic_options{ 10 });
    const auto dir = scratch_dir("acceptance_reports");
    eval_options opts;
    opts.limit     = 3;
    opts.timestamp = "2024-01-01T00:00:00Z";

    auto spec = arith_spec();
    spec.method = amateur_variant{ amateur_kind::no_cot, {} };
    const auto table = sweep_alpha(be, be, spec, { 0.5, 0.7, 0.8, 0.9 }, dir.string(), opts);
    const auto md = sweep_markdown(table);

    const auto ref = nlohmann::json::parse(read_file(fixture("reference_alpha_sweep.json")));
    bool sweep_ok = table.size() == ref["rows"].size() && md.rfind("| α | Accuracy |\n|---|---|\n", 0) == 0 &&
                    std::count(md.begin(), md.end(), '\n') == 2 + static_cast<long>(ref["rows"].size());
    for (std::size_t i = 0; sweep_ok && i < table.size(); ++i) {
        sweep_ok = table[i].alpha == ref["rows"][i][0].get<double>();
    }

    // one run per reference column
    std::vector<std::pair<run_method, double>> methods = {
        { std::nullopt, 0.0 },
        { amateur_variant{ amateur_kind::no_context, {} }, 0.5 },
        { amateur_variant{ amateur_kind::no_context, {} }, 0.8 },
        { amateur_variant{ amateur_kind::answers_only, {} }, 0.5 },
        { amateur_variant{ amateur_kind::answers_only, {} }, 0.8 },
        { amateur_variant{ amateur_kind::no_cot, {} }, 0.5 },
        { amateur_variant{ amateur_kind::no_cot, {} }, 0.8 },
        { amateur_variant{ amateur_kind::coherence_boost, {} }, 0.5 },
        { amateur_variant{ amateur_kind::coherence_boost, {} }, 0.8 },
    };
    std::vector<analysis_report> reports;
    for (const auto & [m, a] : methods) {
        auto s = arith_spec();
        s.method = m;
        s.generation.contrast.alpha = a;
        const auto path = (dir / run_file_name(s, a)).string();
        run_eval(be, be, s, path, opts);
        reports.push_back(analyze_run(path));
    }
    const auto rmd = report_markdown(reports);
    const auto ref5 = nlohmann::json::parse(read_file(fixture("reference_output_analysis.json")));
    std::istringstream lines(rmd);
    std::string header, rule, mean, prop;
    std::getline(lines, header);
    std::getline(lines, rule);
    std::getline(lines, mean);
    std::getline(lines, prop);
    auto cells = [](const std::string & row) { return std::count(row.begin(), row.end(), '|') - 2; };
    const long cols = static_cast<long>(ref5["columns"].size());
    bool labels_ok = reports.front().method == ref5["columns"][0].get<std::string>() &&
                     reports.back().method == ref5["columns"][cols - 1].get<std::string>();
    const bool analysis_ok = cells(header) == cols && cells(mean) == cols && cells(prop) == cols &&
                             mean.rfind("| Mean |", 0) == 0 && prop.rfind("| Proportion |", 0) == 0 && labels_ok;

    return { sweep_ok && analysis_ok, "sweep table " + std::to_string(table.size()) + " rows (" +
                                          (sweep_ok ? "shape ok" : "shape WRONG") + "); analysis " +
                                          std::to_string(cells(header)) + " method columns x Mean/Proportion (" +
                                          (analysis_ok ? "shape ok" : "shape WRONG") + ")" };
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<outcome()>>> criteria = {
        { "combiner equals probability-ratio oracle", combiner_matches_oracle },
        { "alpha 0 decoding equals baseline", alpha_zero_equals_baseline },
        { "n-gram fixture flips under contrast", ngram_flip },
        { "n-gram scores equal smoothed counts", ngram_exact },
        { "prompt goldens byte-identical", prompt_goldens },
        { "expression evaluation exact", expressions_exact },
        { "answer extraction hand labels", extraction_cases },
        { "interrupted run resumes to identical file", resumability },
        { "HTTP mock logits bitwise equal", http_bitwise },
        { "sweep and analysis report shapes", report_shapes },
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception & e) {
            o = { false, std::string("exception: ") + e.what() };
        }
        failed += !o.pass;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << (i + 1) << ". " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? 0 : 1;
}
