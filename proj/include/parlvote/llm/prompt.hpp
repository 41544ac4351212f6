#pragma once

#include "parlvote/corpus.hpp"
#include "parlvote/llm/context.hpp"
#include "parlvote/llm/types.hpp"

#include <string>
#include <string_view>

namespace parlvote::llm {

inline constexpr std::string_view kPromptTemplateVersion = "prompt-v1";

bool is_known_template_version(std::string_view version);

struct Prompt {
    TaskKind task = TaskKind::VotePrediction;
    std::string template_version;
    std::string speech_id;
    std::string system_text;
    std::string user_text;
    // "<template version>:<sha256 of task, speech id, resolved attributes>"
    std::string context_fingerprint;

    bool operator==(const Prompt&) const = default;
};

/// Template version encoded in a fingerprint, or empty if malformed.
std::string_view fingerprint_template_version(std::string_view fingerprint);

std::string context_fingerprint(const ResolvedContext& resolved, std::string_view template_version);

/// Renders the prompt. The user text is line-oriented: one fixed task line,
/// then one sentence line per included attribute, the verbatim speech between
/// fences, and the answer-format instruction.
Prompt build_prompt(TaskKind task, const Debate& debate, const Speech& speech, const ResolvedContext& resolved);

/// The sentence an attribute contributes to the user text.
std::string attribute_sentence(Attribute a, std::string_view value);

}  // namespace parlvote::llm
