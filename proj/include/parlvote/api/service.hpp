#pragma once

#include "parlvote/bias/analysis.hpp"
#include "parlvote/corpus.hpp"
#include "parlvote/llm/gateway.hpp"
#include "parlvote/store/prediction_store.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace parlvote::api {

/// Server configuration file:
///
///     {"bind_address": "127.0.0.1", "port": 8080,
///      "corpus_path": "corpus", "store_path": "predictions.log",
///      "provider_registry_path": "providers.json",
///      "ui_origin": "http://localhost:5173",
///      "stereotype_lexicon_path": "...", "topic_lexicon_path": "...",
///      "failure_rules_path": "...", "request_deadline_ms": 60000}
///
/// Relative paths resolve against the config file's directory. The three
/// analysis paths default to the bundled data files.
struct ApiConfig {
    std::string bind_address = "127.0.0.1";
    int port = 8080;
    std::filesystem::path corpus_path;
    std::filesystem::path store_path;
    std::filesystem::path provider_registry_path;
    std::string ui_origin;
    std::filesystem::path stereotype_lexicon_path;
    std::filesystem::path topic_lexicon_path;
    std::filesystem::path failure_rules_path;
    std::chrono::milliseconds request_deadline{60000};

    /// Throws std::invalid_argument on missing or mistyped fields.
    static ApiConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
    static ApiConfig load(const std::filesystem::path& path);
};

/// Bundled lexicon and ruleset directory.
std::filesystem::path default_data_dir();

struct ApiRequest {
    std::string method;  // GET, POST, OPTIONS
    std::string path;    // e.g. /v1/votes/rc-1/breakdown
    std::map<std::string, std::string> query;
    std::string body;
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body;  // null for 204
    std::map<std::string, std::string> headers;
};

struct AnalysisResources {
    bias::StereotypeLexicon stereotypes;
    bias::TopicLexicon topics;
    bias::FailureRuleset failure_rules;
};

/// Transport-independent request handler. Every non-2xx body is
/// {"error": {"code", "message", "details"?}}. Only POST /v1/predict writes
/// to the store. Responses name models by "provider/model" and never carry
/// endpoints or credentials.
class ApiService {
public:
    ApiService(std::shared_ptr<const Corpus> corpus, std::shared_ptr<store::PredictionStore> store,
               std::shared_ptr<const llm::Gateway> gateway, std::shared_ptr<const AnalysisResources> analysis,
               std::string ui_origin = {}, std::chrono::milliseconds deadline = std::chrono::seconds(60));

    ApiResponse handle(const ApiRequest& request) const;

private:
    ApiResponse route(const ApiRequest& request) const;
    ApiResponse list_votes(const ApiRequest& r) const;
    ApiResponse get_vote(const std::string& id) const;
    ApiResponse get_breakdown(const std::string& id, const ApiRequest& r) const;
    ApiResponse list_models() const;
    ApiResponse predict(const ApiRequest& r) const;
    ApiResponse counterfactual(const ApiRequest& r) const;
    ApiResponse analysis_accuracy(const ApiRequest& r) const;
    ApiResponse analysis_stereotypes(const ApiRequest& r) const;
    ApiResponse analysis_topics(const ApiRequest& r) const;
    ApiResponse analysis_failures(const ApiRequest& r) const;

    std::shared_ptr<const Corpus> corpus_;
    std::shared_ptr<store::PredictionStore> store_;
    std::shared_ptr<const llm::Gateway> gateway_;
    std::shared_ptr<const AnalysisResources> analysis_;
    std::string ui_origin_;
    std::chrono::milliseconds deadline_;
};

/// Everything `serve` needs, loaded from a config. Throws on unreadable inputs.
struct ServiceBundle {
    ApiConfig config;
    std::shared_ptr<const Corpus> corpus;
    std::shared_ptr<store::PredictionStore> store;
    std::shared_ptr<const llm::Gateway> gateway;
    std::shared_ptr<const AnalysisResources> analysis;
    std::unique_ptr<ApiService> service;
};

ServiceBundle load_service(const ApiConfig& config);

/// HTTP/1.1 front end for ApiService.
class HttpServer {
public:
    explicit HttpServer(const ApiService& service);
    ~HttpServer();

    /// Binds; port 0 picks a free port. Returns the bound port or -1.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace parlvote::api
