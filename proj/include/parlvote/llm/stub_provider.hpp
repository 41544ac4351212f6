#pragma once

#include "parlvote/llm/provider.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace parlvote::llm {

/// Deterministic in-process provider driven by a script.
///
/// Script document:
///
///     {
///       "seed": 7,
///       "models": {
///         "alpha": {
///           "fail": "timeout",            // optional model-wide failure
///           "latency_ms": 0,
///           "rules": [
///             {"speech_id": "s1", "contains": "sovereignty",
///              "output": "label: Against\n...", "fail": "refusal",
///              "fail_times": 1, "latency_ms": 5}
///           ]
///         }
///       }
///     }
///
/// Rules are tried in order; `speech_id` and `contains` (substring of the
/// user text) must both match when present. A matching rule either fails
/// (`fail` = timeout | refusal | transport, optionally only for its first
/// `fail_times` calls) or returns `output` verbatim. Without a matching rule
/// the answer is derived from hash(seed, model, prompt fingerprint).
class StubProvider : public ModelProvider {
public:
    struct Call {
        std::string model_name;
        std::string fingerprint;
        std::string system_text;
        std::string user_text;
        GenerationParams params;
    };

    StubProvider() : StubProvider(nlohmann::json::object()) {}
    explicit StubProvider(nlohmann::json script);

    RawResponse complete(const ModelSpec& model, const Prompt& prompt, const GenerationParams& params,
                         std::chrono::milliseconds timeout) override;

    std::vector<Call> calls() const;
    size_t call_count() const;

    /// The answer the seeded fallback produces, exposed for tests.
    static std::string seeded_answer(long long seed, const std::string& model_name, const Prompt& prompt);

private:
    struct Rule {
        std::optional<std::string> speech_id;
        std::optional<std::string> contains;
        std::optional<std::string> output;
        std::optional<std::string> fail;
        std::optional<int> fail_times;
        int latency_ms = 0;
        int hits = 0;
    };
    struct ModelScript {
        std::optional<std::string> fail;
        int latency_ms = 0;
        std::vector<Rule> rules;
    };

    long long seed_ = 0;
    std::map<std::string, ModelScript> models_;
    mutable std::mutex mu_;
    std::vector<Call> calls_;
};

}  // namespace parlvote::llm
