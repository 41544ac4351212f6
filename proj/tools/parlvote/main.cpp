// parlvote command-line tool.
//
// Exit codes: 0 success, 1 validation or data failure, 2 environment failure
// (missing inputs, unwritable outputs, unusable configuration).

#include "parlvote/api/service.hpp"
#include "parlvote/batch.hpp"
#include "parlvote/util/csv.hpp"
#include "parlvote/util/text.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <thread>

namespace fs = std::filesystem;
using namespace parlvote;

namespace {

constexpr int kOk = 0;
constexpr int kDataFailure = 1;
constexpr int kEnvFailure = 2;

void log_line(const std::string& line) { std::cerr << "parlvote: " << line << "\n"; }

int corpus_error_exit(const CorpusError& e) {
    log_line(std::string("corpus: ") + e.what());
    return e.kind() == CorpusError::Kind::MissingFile ? kEnvFailure : kDataFailure;
}

void print_violations(const ValidationReport& report) {
    for (const auto& v : report.violations)
        std::cout << v.record_kind << "\t" << v.record_id << "\t" << v.rule << "\t" << v.detail << "\n";
}

nlohmann::json violations_json(const ValidationReport& report) {
    auto arr = nlohmann::json::array();
    for (const auto& v : report.violations)
        arr.push_back({{"record_kind", v.record_kind}, {"record_id", v.record_id}, {"rule", v.rule}, {"detail", v.detail}});
    return {{"violations", arr}};
}

// Reads and validates without throwing on rule violations so that all of
// them can be listed. Returns nullopt with the exit code set on failure.
std::optional<Corpus> read_and_check(const fs::path& dir, const std::string& report_path, int& exit_code) {
    Corpus corpus;
    try {
        if (!fs::is_directory(dir))
            throw CorpusError(CorpusError::Kind::MissingFile, "no corpus directory at " + dir.string(), dir.string());
        corpus = read_corpus_files(dir);
    } catch (const CorpusError& e) {
        exit_code = corpus_error_exit(e);
        return std::nullopt;
    }
    auto report = validate_corpus(corpus);
    print_violations(report);
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        out << violations_json(report).dump(2) << "\n";
        if (!out) {
            log_line("cannot write " + report_path);
            exit_code = kEnvFailure;
            return std::nullopt;
        }
    }
    if (!report.ok()) {
        log_line(std::to_string(report.violations.size()) + " violation(s)");
        exit_code = kDataFailure;
        return std::nullopt;
    }
    exit_code = kOk;
    return corpus;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto& part : text::split(s, ','))
        if (auto t = text::trim(part); !t.empty()) out.push_back(t);
    return out;
}

fs::path data_file(const std::string& explicit_path, const char* name) {
    return explicit_path.empty() ? api::default_data_dir() / name : fs::path(explicit_path);
}

int serve(const api::ApiConfig& config) {
    // Block termination signals before any thread starts; a waiter thread stops the server.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    auto bundle = api::load_service(config);
    api::HttpServer server(*bundle.service);
    int port = server.bind(config.bind_address, config.port);
    if (port < 0) {
        log_line("cannot bind " + config.bind_address + ":" + std::to_string(config.port));
        return kEnvFailure;
    }
    log_line("listening on " + config.bind_address + ":" + std::to_string(port));
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        log_line("shutting down");
        server.stop();
    });
    bool ok = server.listen_after_bind();
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return ok ? kOk : kEnvFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Roll-call vote exploration and LLM bias analysis"};
    app.require_subcommand(1);
    int exit_code = kOk;

    // ingest
    std::string ingest_in, ingest_out, ingest_report;
    auto* ingest = app.add_subcommand("ingest", "Validate record files and write the canonical corpus");
    ingest->add_option("--input", ingest_in, "Directory with the five record files")->required();
    ingest->add_option("--out", ingest_out, "Output corpus directory")->required();
    ingest->add_option("--report", ingest_report, "Also write the violations report as JSON");
    ingest->callback([&] {
        auto corpus = read_and_check(ingest_in, ingest_report, exit_code);
        if (!corpus) return;
        try {
            write_corpus(*corpus, ingest_out);
        } catch (const std::exception& e) {
            log_line(e.what());
            exit_code = kEnvFailure;
            return;
        }
        log_line("wrote " + std::to_string(corpus->speeches.size()) + " speeches, " +
                 std::to_string(corpus->roll_calls.size()) + " roll calls to " + ingest_out);
    });

    // validate
    std::string validate_corpus_dir, validate_report;
    auto* validate = app.add_subcommand("validate", "Check a corpus; prints one violation per line");
    validate->add_option("--corpus", validate_corpus_dir, "Corpus directory")->required();
    validate->add_option("--report", validate_report, "Also write the violations report as JSON");
    validate->callback([&] { read_and_check(validate_corpus_dir, validate_report, exit_code); });

    // eval
    std::string eval_task = "vote", eval_models, eval_context = "speech", eval_corpus, eval_store, eval_providers;
    size_t eval_limit = 0;
    std::uint64_t eval_seed = 0;
    bool eval_rerun = false;
    int eval_jobs = 4;
    double eval_temperature = llm::GenerationParams{}.temperature;
    int eval_max_tokens = llm::GenerationParams{}.max_output_tokens;
    auto* eval = app.add_subcommand("eval", "Run a prediction sweep and append records to the store");
    eval->add_option("--task", eval_task, "vote or gender")->check(CLI::IsMember({"vote", "gender"}));
    eval->add_option("--models", eval_models, "Comma-separated provider/model ids")->required();
    eval->add_option("--context", eval_context, "Comma-separated attributes, or 'speech' for speech only");
    eval->add_option("--corpus", eval_corpus, "Corpus directory")->required();
    eval->add_option("--store", eval_store, "Prediction log")->required();
    eval->add_option("--providers", eval_providers, "Provider registry (default: built-in stub)");
    auto* limit_opt = eval->add_option("--limit", eval_limit, "Score at most N speeches")->check(CLI::PositiveNumber);
    auto* seed_opt = eval->add_option("--seed", eval_seed, "Sample the limited speeches with this seed");
    eval->add_flag("--rerun", eval_rerun, "Score pairs already in the store again");
    eval->add_option("--jobs", eval_jobs, "Speeches scored concurrently")->check(CLI::Range(1, 64));
    eval->add_option("--temperature", eval_temperature, "Sampling temperature");
    eval->add_option("--max-tokens", eval_max_tokens, "Output token budget");
    eval->callback([&] {
        Corpus corpus;
        try {
            corpus = load_corpus(eval_corpus);
        } catch (const CorpusError& e) {
            exit_code = corpus_error_exit(e);
            return;
        }
        std::shared_ptr<const llm::ProviderRegistry> registry;
        try {
            registry = std::make_shared<const llm::ProviderRegistry>(
                eval_providers.empty() ? llm::ProviderRegistry::default_stub()
                                       : llm::ProviderRegistry::load(eval_providers));
        } catch (const std::exception& e) {
            log_line(std::string("providers: ") + e.what());
            exit_code = kEnvFailure;
            return;
        }
        batch::SweepOptions opts;
        opts.task = *llm::parse_task(eval_task);
        opts.models = split_list(eval_models);
        opts.params.temperature = eval_temperature;
        opts.params.max_output_tokens = eval_max_tokens;
        opts.rerun = eval_rerun;
        opts.speeches_in_flight = static_cast<size_t>(eval_jobs);
        if (limit_opt->count()) opts.limit = eval_limit;
        if (seed_opt->count()) opts.seed = eval_seed;
        try {
            opts.context = llm::parse_context_flags(eval_context);
            store::PredictionStore store(eval_store);
            llm::Gateway gateway(registry);
            auto summary = batch::run_sweep(corpus, store, gateway, opts, log_line);
            for (const auto& m : summary.models) {
                char acc[32] = "n/a";
                if (m.recorded > 0) std::snprintf(acc, sizeof acc, "%.4f", double(m.correct) / double(m.recorded));
                log_line("model " + m.model + ": recorded " + std::to_string(m.recorded) + ", correct " +
                         std::to_string(m.correct) + ", accuracy " + acc + ", failed " + std::to_string(m.failed) +
                         ", skipped " + std::to_string(m.skipped));
            }
        } catch (const llm::GatewayError& e) {
            log_line(std::string(to_string(e.kind())) + ": " + e.what());
            exit_code = e.kind() == llm::GatewayError::Kind::UnknownProvider ? kEnvFailure : kDataFailure;
        } catch (const store::StoreError& e) {
            log_line(std::string("store: ") + e.what());
            exit_code = e.kind() == store::StoreError::Kind::StorageFailure ? kEnvFailure : kDataFailure;
        }
    });

    // analyze
    std::string an_store, an_report, an_stereotypes, an_topics, an_rules, an_counting = "case";
    int an_threshold = bias::kDefaultConfidenceThreshold;
    auto* analyze = app.add_subcommand("analyze", "Write analysis and accuracy CSVs for a prediction log");
    analyze->add_option("--store", an_store, "Prediction log")->required();
    analyze->add_option("--report", an_report, "Output directory")->required();
    analyze->add_option("--threshold", an_threshold, "Minimum confidence of analysed errors")->check(CLI::Range(1, 5));
    analyze->add_option("--stereotypes", an_stereotypes, "Stereotype lexicon (TSV)");
    analyze->add_option("--topics", an_topics, "Topic lexicon (TSV)");
    analyze->add_option("--rules", an_rules, "Failure ruleset (JSON)");
    analyze->add_option("--counting", an_counting, "case or mention")->check(CLI::IsMember({"case", "mention"}));
    analyze->callback([&] {
        if (!fs::is_regular_file(an_store)) {
            log_line("no prediction log at " + an_store);
            exit_code = kEnvFailure;
            return;
        }
        try {
            auto stereotypes = bias::StereotypeLexicon::load(data_file(an_stereotypes, "stereotype_terms.tsv"));
            auto topics = bias::TopicLexicon::load(data_file(an_topics, "topic_keywords.tsv"));
            auto rules = bias::FailureRuleset::load(data_file(an_rules, "failure_rules.json"));
            store::PredictionStore store(an_store);
            batch::ReportOptions opts;
            opts.threshold = an_threshold;
            opts.counting = an_counting == "mention" ? bias::CountingMode::MentionLevel : bias::CountingMode::CaseLevel;
            auto files = batch::write_reports(store, stereotypes, topics, rules, an_report, opts);
            log_line("wrote " + std::to_string(files.size()) + " reports to " + an_report + " (threshold " +
                     std::to_string(an_threshold) + "; stereotype and topic tables from gender-task errors, "
                     "failure categories from vote-task errors; ruleset " + rules.version + ")");
        } catch (const bias::LexiconError& e) {
            log_line(e.what());
            exit_code = kEnvFailure;
        } catch (const bias::AnalysisError& e) {
            log_line(e.what());
            exit_code = kEnvFailure;
        } catch (const store::StoreError& e) {
            log_line(std::string("store: ") + e.what());
            exit_code = e.kind() == store::StoreError::Kind::StorageFailure ? kEnvFailure : kDataFailure;
        } catch (const std::runtime_error& e) {
            log_line(e.what());
            exit_code = kEnvFailure;
        }
    });

    // serve
    std::string serve_config;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
    serve_cmd->add_option("--config", serve_config, "Server config (JSON)")->required();
    serve_cmd->callback([&] {
        try {
            exit_code = serve(api::ApiConfig::load(serve_config));
        } catch (const CorpusError& e) {
            exit_code = corpus_error_exit(e);
        } catch (const std::exception& e) {
            log_line(e.what());
            exit_code = kEnvFailure;
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kEnvFailure;
    }
    return exit_code;
}
