#pragma once

#include "parlvote/llm/types.hpp"

#include <string_view>
#include <variant>

namespace parlvote::llm {

struct ParseFailure {
    GatewayError::Kind kind;  // UnparseableOutput, OutOfRangeConfidence or WrongLabelSet
    std::string message;
};

/// Non-throwing form. Accepts `label:` / `confidence:` / `reasoning:` lines
/// (case-insensitive keys, markdown emphasis and quotes tolerated, prose
/// around them ignored) or a JSON object with the same keys embedded in the
/// text. Confidence outside 1..5 is rejected, never clamped.
std::variant<ParsedPrediction, ParseFailure> try_parse_prediction(std::string_view raw, TaskKind task);

/// Throwing form of try_parse_prediction.
ParsedPrediction parse_prediction(const RawResponse& raw, TaskKind task);

/// Renders the canonical three-line answer the prompts ask for.
std::string format_answer(const ParsedPrediction& p);

}  // namespace parlvote::llm
