#include "parlvote/llm/types.hpp"

#include "parlvote/util/text.hpp"

#include <array>
#include <cmath>

namespace parlvote::llm {

std::string_view to_string(TaskKind t) { return t == TaskKind::VotePrediction ? "vote" : "gender"; }

std::optional<TaskKind> parse_task(std::string_view s) {
    if (s == "vote") return TaskKind::VotePrediction;
    if (s == "gender") return TaskKind::GenderPrediction;
    return std::nullopt;
}

std::string_view to_string(Label l) {
    switch (l) {
        case Label::For: return "For";
        case Label::Against: return "Against";
        case Label::Abstain: return "Abstain";
        case Label::Male: return "Male";
        case Label::Female: return "Female";
    }
    return "?";
}

std::optional<Label> parse_label(std::string_view s) {
    for (auto l : {Label::For, Label::Against, Label::Abstain, Label::Male, Label::Female})
        if (text::iequals(s, to_string(l))) return l;
    return std::nullopt;
}

std::span<const Label> labels_for(TaskKind task) {
    static constexpr std::array<Label, 3> vote{Label::For, Label::Against, Label::Abstain};
    static constexpr std::array<Label, 2> gender{Label::Male, Label::Female};
    if (task == TaskKind::VotePrediction) return vote;
    return gender;
}

bool label_in_task(Label l, TaskKind task) {
    for (auto x : labels_for(task))
        if (x == l) return true;
    return false;
}

Label to_label(VoteChoice c) {
    switch (c) {
        case VoteChoice::For: return Label::For;
        case VoteChoice::Against: return Label::Against;
        case VoteChoice::Abstain: return Label::Abstain;
    }
    return Label::For;
}

Label to_label(Gender g) { return g == Gender::Male ? Label::Male : Label::Female; }

void GenerationParams::validate() const {
    if (!std::isfinite(temperature) || temperature < 0.0 || temperature > 2.0)
        throw GatewayError(GatewayError::Kind::InvalidParams, "temperature must be within [0, 2]");
    if (max_output_tokens <= 0)
        throw GatewayError(GatewayError::Kind::InvalidParams, "max_output_tokens must be positive");
}

std::string_view to_string(GatewayError::Kind k) {
    using K = GatewayError::Kind;
    switch (k) {
        case K::UnknownSpeech: return "UnknownSpeech";
        case K::IllegalOverride: return "IllegalOverride";
        case K::InvalidConfig: return "InvalidConfig";
        case K::InvalidParams: return "InvalidParams";
        case K::UnknownProvider: return "UnknownProvider";
        case K::ProviderTimeout: return "ProviderTimeout";
        case K::ProviderRefusal: return "ProviderRefusal";
        case K::TransportFailure: return "TransportFailure";
        case K::UnparseableOutput: return "UnparseableOutput";
        case K::OutOfRangeConfidence: return "OutOfRangeConfidence";
        case K::WrongLabelSet: return "WrongLabelSet";
    }
    return "Unknown";
}

}  // namespace parlvote::llm
