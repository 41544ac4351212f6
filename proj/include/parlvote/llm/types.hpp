#pragma once

#include "parlvote/corpus.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace parlvote::llm {

enum class TaskKind { VotePrediction, GenderPrediction };

std::string_view to_string(TaskKind t);  // "vote" / "gender"
std::optional<TaskKind> parse_task(std::string_view s);

/// Union of both tasks' label sets.
enum class Label { For, Against, Abstain, Male, Female };

std::string_view to_string(Label l);
std::optional<Label> parse_label(std::string_view s);  // case-insensitive
std::span<const Label> labels_for(TaskKind task);
bool label_in_task(Label l, TaskKind task);
Label to_label(VoteChoice c);
Label to_label(Gender g);

struct GenerationParams {
    double temperature = 0.3;
    int max_output_tokens = 512;

    /// Throws GatewayError(InvalidParams) outside temperature [0,2] or a
    /// non-positive token budget.
    void validate() const;
    bool operator==(const GenerationParams&) const = default;
};

struct ModelSpec {
    std::string provider_id;
    std::string model_name;
    std::string endpoint;  // URL, or "stub"

    /// "provider/model"; the only form exposed outside the gateway.
    std::string id() const { return provider_id + "/" + model_name; }
    bool operator==(const ModelSpec&) const = default;
};

struct ParsedPrediction {
    Label label = Label::For;
    int confidence = 1;  // 1..5
    std::string reasoning;
    bool operator==(const ParsedPrediction&) const = default;
};

struct RawResponse {
    std::string text;  // verbatim model output
    std::chrono::milliseconds latency{0};
    std::string provider_id;
    std::string model_name;
    int attempts = 1;
    nlohmann::json metadata = nlohmann::json::object();
};

class GatewayError : public std::runtime_error {
public:
    enum class Kind {
        UnknownSpeech,
        IllegalOverride,
        InvalidConfig,
        InvalidParams,
        UnknownProvider,
        ProviderTimeout,
        ProviderRefusal,
        TransportFailure,
        UnparseableOutput,
        OutOfRangeConfidence,
        WrongLabelSet,
    };

    GatewayError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

std::string_view to_string(GatewayError::Kind k);

}  // namespace parlvote::llm
