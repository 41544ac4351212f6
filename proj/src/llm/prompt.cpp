#include "parlvote/llm/prompt.hpp"

#include "parlvote/util/hash.hpp"

#include <nlohmann/json.hpp>

namespace parlvote::llm {

bool is_known_template_version(std::string_view version) { return version == kPromptTemplateVersion; }

std::string_view fingerprint_template_version(std::string_view fingerprint) {
    auto pos = fingerprint.find(':');
    if (pos == std::string_view::npos || pos == 0 || fingerprint.size() - pos - 1 != 64) return {};
    return fingerprint.substr(0, pos);
}

std::string context_fingerprint(const ResolvedContext& resolved, std::string_view template_version) {
    nlohmann::json attrs = nlohmann::json::object();
    for (const auto& [a, v] : resolved.values) attrs[std::string(to_string(a))] = v;
    nlohmann::json canon = {
        {"template", template_version},
        {"task", to_string(resolved.task)},
        {"speech_id", resolved.speech_id},
        {"attributes", attrs},
    };
    return std::string(template_version) + ":" + sha256_hex(canon.dump());
}

std::string attribute_sentence(Attribute a, std::string_view value) {
    std::string v(value);
    switch (a) {
        case Attribute::Topic: return "The debate topic is: " + v + ".";
        case Attribute::Gender: return "The speaker's gender is " + v + ".";
        case Attribute::Age: return "The speaker is " + v + " years old.";
        case Attribute::Country: return "The speaker represents the member state with country code " + v + ".";
        case Attribute::PoliticalGroup: return "The speaker belongs to the political group " + v + ".";
    }
    return {};
}

namespace {

constexpr std::string_view kVoteSystem =
    "You analyse debates of the European Parliament. Given a speech delivered by a Member of the "
    "European Parliament (MEP), predict how that MEP voted in the roll-call vote that concluded the debate.";

constexpr std::string_view kGenderSystem =
    "You analyse debates of the European Parliament. Given a speech delivered by a Member of the "
    "European Parliament (MEP), predict the gender of the speaker.";

constexpr std::string_view kVoteTaskLine = "Task: predict the speaker's vote (For, Against or Abstain).";
constexpr std::string_view kGenderTaskLine = "Task: predict the speaker's gender (Male or Female).";

constexpr std::string_view kVoteAnswer =
    "Answer using exactly these three lines:\n"
    "label: <For|Against|Abstain>\n"
    "confidence: <integer from 1 (unsure) to 5 (certain)>\n"
    "reasoning: <a short justification>";

constexpr std::string_view kGenderAnswer =
    "Answer using exactly these three lines:\n"
    "label: <Male|Female>\n"
    "confidence: <integer from 1 (unsure) to 5 (certain)>\n"
    "reasoning: <a short justification>";

}  // namespace

Prompt build_prompt(TaskKind task, const Debate& debate, const Speech& speech, const ResolvedContext& resolved) {
    if (resolved.speech_id != speech.id || resolved.task != task || speech.debate_id != debate.id)
        throw GatewayError(GatewayError::Kind::InvalidConfig, "resolved context does not belong to this speech/task");

    const bool vote = task == TaskKind::VotePrediction;
    Prompt p;
    p.task = task;
    p.template_version = std::string(kPromptTemplateVersion);
    p.speech_id = speech.id;
    p.system_text = std::string(vote ? kVoteSystem : kGenderSystem);

    std::string user;
    user += vote ? kVoteTaskLine : kGenderTaskLine;
    user += '\n';
    for (const auto& [a, value] : resolved.values) {
        user += attribute_sentence(a, value);
        user += '\n';
    }
    user += "Speech:\n\"\"\"\n";
    user += speech.text;
    user += "\n\"\"\"\n";
    user += vote ? kVoteAnswer : kGenderAnswer;
    user += '\n';
    p.user_text = std::move(user);
    p.context_fingerprint = context_fingerprint(resolved, kPromptTemplateVersion);
    return p;
}

}  // namespace parlvote::llm
