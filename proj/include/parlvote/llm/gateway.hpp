#pragma once

#include "parlvote/corpus.hpp"
#include "parlvote/llm/context.hpp"
#include "parlvote/llm/parse.hpp"
#include "parlvote/llm/prompt.hpp"
#include "parlvote/llm/provider.hpp"
#include "parlvote/llm/types.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace parlvote::llm {

struct ProviderEntry {
    std::string id;
    std::string kind;      // "stub" or "chat_completions"
    std::string endpoint;  // "stub" for the in-process provider
    std::string auth_env;
    std::vector<std::string> models;  // empty: any model name accepted
    std::shared_ptr<ModelProvider> provider;
    std::shared_ptr<InFlightLimiter> limiter;
};

/// provider_id -> adapter. Registry file:
///
///     {"providers": [
///       {"id": "stub", "kind": "stub", "script": "stub_script.json", "max_in_flight": 4},
///       {"id": "openai", "kind": "chat_completions", "endpoint": "https://api.openai.com",
///        "auth_env": "OPENAI_API_KEY", "models": ["gpt-4o"], "max_in_flight": 2}
///     ]}
///
/// `script` may be inline JSON or a path relative to the registry file.
class ProviderRegistry {
public:
    void add(ProviderEntry entry);
    void add_provider(std::string id, std::shared_ptr<ModelProvider> provider, int max_in_flight = 4);

    const ProviderEntry* find(std::string_view provider_id) const;
    std::vector<std::string> provider_ids() const;

    /// Resolves "provider/model". Throws GatewayError(UnknownProvider).
    ModelSpec resolve(std::string_view model_id) const;

    static ProviderRegistry from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
    static ProviderRegistry load(const std::filesystem::path& path);
    /// A single "stub" provider with default script.
    static ProviderRegistry default_stub();

private:
    std::map<std::string, ProviderEntry, std::less<>> entries_;
};

struct RetryPolicy {
    int max_retries = 2;
    std::chrono::milliseconds base_backoff{250};  // doubled after each failed attempt
    std::chrono::milliseconds attempt_timeout{30000};
};

struct ModelFailure {
    GatewayError::Kind kind;
    std::string message;
};

struct ModelOutcome {
    ModelSpec model;
    std::variant<ParsedPrediction, ModelFailure> result;
    std::optional<RawResponse> raw;

    bool ok() const { return std::holds_alternative<ParsedPrediction>(result); }
};

/// Dispatches prompts to registered providers with retry and per-provider
/// in-flight caps.
class Gateway {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;
    using Clock = std::chrono::steady_clock;

    explicit Gateway(std::shared_ptr<const ProviderRegistry> registry, RetryPolicy policy = {},
                     Sleeper sleeper = {});

    const ProviderRegistry& registry() const { return *registry_; }
    const RetryPolicy& policy() const { return policy_; }

    /// Timeouts and transport failures are retried up to max_retries times
    /// with exponential backoff; refusals are not retried. The last error is
    /// rethrown once the budget (or the deadline) is exhausted.
    RawResponse predict(const ModelSpec& model, const Prompt& prompt, const GenerationParams& params,
                        std::optional<Clock::time_point> deadline = std::nullopt) const;

    /// Sends one identical prompt and params to every model concurrently.
    /// Per-model failures are captured in the outcome; results keep input order.
    std::vector<ModelOutcome> compare_models(std::span<const ModelSpec> models, const Prompt& prompt,
                                             const GenerationParams& params,
                                             std::optional<Clock::time_point> deadline = std::nullopt) const;

    ModelOutcome predict_and_parse(const ModelSpec& model, const Prompt& prompt, const GenerationParams& params,
                                   std::optional<Clock::time_point> deadline = std::nullopt) const;

private:
    std::shared_ptr<const ProviderRegistry> registry_;
    RetryPolicy policy_;
    Sleeper sleeper_;
};

/// Resolves and renders the prompt for one speech.
Prompt prepare_prompt(const Corpus& corpus, std::string_view speech_id, TaskKind task, const ContextConfig& config,
                      ResolvedContext* resolved_out = nullptr);

}  // namespace parlvote::llm
