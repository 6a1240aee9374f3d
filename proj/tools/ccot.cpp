#include "ccot/cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

namespace {

std::atomic<bool> g_interrupted{ false };
ccot::logit_server * g_server = nullptr;

void on_signal(int) {
    g_interrupted = true;
    if (g_server) {
        g_server->stop();
    }
}

struct run_flags {
    std::string              config;
    std::string              dataset;
    std::string              format;
    std::string              exemplars;
    std::string              variant;
    std::vector<double>      alphas;
    std::string              mode;
    std::string              backend;
    std::string              amateur_backend;
    std::size_t              limit = 0;
    std::size_t              workers = 1;
    std::size_t              max_new_tokens = 512;
    std::size_t              shots = ccot::default_shots;
    std::size_t              keep_last_chars = 0;
    std::string              out;
    std::uint64_t            seed = 0;
    std::string              timestamp;
    std::vector<CLI::Option *> opts;

    void add(CLI::App * app) {
        app->add_option("--config", config, "JSON run configuration");
        app->add_option("--dataset", dataset, "dataset path");
        app->add_option("--format", format, "gsm8k_jsonl | aqua_json | csqa_jsonl | canonical_jsonl");
        app->add_option("--exemplars", exemplars, "few-shot exemplar JSONL");
        app->add_option("--variant", variant, "baseline | no_context | answers_only | no_cot | coherence_boost");
        app->add_option("--alpha", alphas, "contrast strength in [0,1] (repeatable for sweep)");
        app->add_option("--mode", mode, "log_space | literal_exp");
        app->add_option("--backend", backend, "synthetic | ngram:PATH | http:URL");
        app->add_option("--amateur-backend", amateur_backend, "separate backend for the amateur context");
        app->add_option("--limit", limit, "evaluate only the first N questions");
        app->add_option("--workers", workers, "concurrent generations");
        app->add_option("--max-new-tokens", max_new_tokens, "generation length cap");
        app->add_option("--shots", shots, "exemplars per prompt");
        app->add_option("--keep-last-chars", keep_last_chars, "coherence_boost suffix length");
        app->add_option("--out", out, "output directory");
        app->add_option("--seed", seed, "synthetic backend seed");
        app->add_option("--timestamp", timestamp, "manifest timestamp for new run files");
    }

    ccot::run_config resolve(CLI::App * app) const {
        ccot::run_config c = config.empty() ? ccot::run_config{} : ccot::run_config::load(config);
        auto given = [&](const char * name) { return app->get_option(name)->count() > 0; };
        if (given("--dataset")) c.dataset = dataset;
        if (given("--format")) c.format = format;
        if (given("--exemplars")) c.exemplars = exemplars;
        if (given("--variant")) c.variant = variant;
        if (given("--alpha")) c.alphas = alphas;
        if (given("--mode")) c.mode = mode;
        if (given("--backend")) c.backend = backend;
        if (given("--amateur-backend")) c.amateur_backend = amateur_backend;
        if (given("--limit")) c.limit = limit;
        if (given("--workers")) c.workers = workers;
        if (given("--max-new-tokens")) c.max_new_tokens = max_new_tokens;
        if (given("--shots")) c.shots = shots;
        if (given("--keep-last-chars")) c.keep_last_chars = keep_last_chars;
        if (given("--out")) c.out = out;
        if (given("--seed")) c.seed = seed;
        if (given("--timestamp")) c.timestamp = timestamp;
        c.validate();
        return c;
    }
};

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{ "Contrastive chain-of-thought decoding and evaluation" };
    app.require_subcommand(1);

    run_flags gen_flags, eval_flags, sweep_flags;

    auto * gen = app.add_subcommand("generate", "decode one question");
    gen_flags.add(gen);
    std::string question;
    bool baseline = false, verbose = false;
    gen->add_option("--question", question, "question text")->required();
    gen->add_flag("--baseline", baseline, "decode without an amateur");
    gen->add_flag("-v,--verbose", verbose, "print per-step flip diagnostics");

    auto * eval = app.add_subcommand("eval", "evaluate one configuration over a dataset");
    eval_flags.add(eval);

    auto * sweep = app.add_subcommand("sweep", "evaluate several alphas");
    sweep_flags.add(sweep);

    auto * analyze = app.add_subcommand("analyze", "sentence and arithmetic analysis of run files");
    std::vector<std::string> run_files;
    std::string analyze_out = "runs";
    analyze->add_option("run_files", run_files, "run files")->required();
    analyze->add_option("--out", analyze_out, "output directory");

    auto * train = app.add_subcommand("train-ngram", "train an n-gram backend");
    std::string corpus, model_out;
    int order = 3;
    double delta = 1.0;
    train->add_option("--corpus", corpus, "training text")->required();
    train->add_option("--order", order, "n-gram order")->check(CLI::PositiveNumber);
    train->add_option("--delta", delta, "additive smoothing constant");
    train->add_option("--out", model_out, "model output path")->required();

    auto * serve = app.add_subcommand("serve-mock", "serve the synthetic backend over HTTP");
    int port = 8080;
    std::uint64_t serve_seed = 0;
    std::string host = "127.0.0.1";
    serve->add_option("--port", port, "listen port (0 picks one)");
    serve->add_option("--seed", serve_seed, "synthetic backend seed");
    serve->add_option("--host", host, "listen address");

    CLI11_PARSE(app, argc, argv);

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    try {
        if (*gen) {
            return ccot::cmd_generate(gen_flags.resolve(gen), question, baseline, verbose, std::cout);
        }
        if (*eval) {
            return ccot::cmd_eval(eval_flags.resolve(eval), std::cout, &g_interrupted);
        }
        if (*sweep) {
            return ccot::cmd_sweep(sweep_flags.resolve(sweep), std::cout, &g_interrupted);
        }
        if (*analyze) {
            return ccot::cmd_analyze(run_files, analyze_out, std::cout);
        }
        if (*train) {
            return ccot::cmd_train_ngram(corpus, order, delta, model_out, std::cout);
        }
        if (*serve) {
            ccot::logit_server server(std::make_shared<ccot::synthetic_backend>(ccot::synthetic_options{ serve_seed }));
            const int bound = server.bind(host, port);
            std::cout << "listening on http://" << host << ":" << bound << std::endl;
            g_server = &server;
            server.serve();
            g_server = nullptr;
            return 0;
        }
    } catch (const ccot::error & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
