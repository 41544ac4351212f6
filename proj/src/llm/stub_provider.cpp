#include "parlvote/llm/stub_provider.hpp"

#include "parlvote/llm/parse.hpp"
#include "parlvote/util/hash.hpp"

#include <array>
#include <thread>

namespace parlvote::llm {

namespace {

[[noreturn]] void raise_failure(const std::string& mode, const std::string& model) {
    if (mode == "timeout") throw GatewayError(GatewayError::Kind::ProviderTimeout, "stub " + model + " timed out");
    if (mode == "refusal") throw GatewayError(GatewayError::Kind::ProviderRefusal, "stub " + model + " refused");
    throw GatewayError(GatewayError::Kind::TransportFailure, "stub " + model + " returned a malformed payload");
}

std::optional<std::string> opt_string(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
}

int opt_int(const nlohmann::json& j, const char* key, int fallback) {
    auto it = j.find(key);
    return (it != j.end() && it->is_number_integer()) ? it->get<int>() : fallback;
}

constexpr std::array<std::string_view, 6> kVoteCues = {
    "The speech invokes national sovereignty as a central concern",
    "The speaker stresses protecting borders",
    "The speaker emphasises climate commitments",
    "The speaker highlights human rights obligations",
    "The speaker criticises the proposal as bureaucratic, suggesting a desire to improve it",
    "The speaker weighs costs against benefits for citizens",
};

constexpr std::array<std::string_view, 3> kVoteHedges = {
    "",
    " It is unclear which way the speaker leans, so the prediction falls back on the general tone.",
    " The position appears firm.",
};

constexpr std::array<std::string_view, 9> kStyles = {
    "assertive", "direct", "structured", "confrontational", "technical",
    "emotional", "personal", "empathetic", "measured",
};

constexpr std::array<std::string_view, 7> kTopics = {
    "economic", "geopolitical", "human rights", "women's rights",
    "gender-mainstreaming", "migration policy", "agricultural",
};

}  // namespace

StubProvider::StubProvider(nlohmann::json script) {
    if (!script.is_object()) return;
    if (auto it = script.find("seed"); it != script.end() && it->is_number_integer()) seed_ = it->get<long long>();
    auto models = script.find("models");
    if (models == script.end() || !models->is_object()) return;
    for (auto it = models->begin(); it != models->end(); ++it) {
        ModelScript ms;
        ms.fail = opt_string(*it, "fail");
        ms.latency_ms = opt_int(*it, "latency_ms", 0);
        if (auto rules = it->find("rules"); rules != it->end() && rules->is_array()) {
            for (const auto& r : *rules) {
                Rule rule;
                rule.speech_id = opt_string(r, "speech_id");
                rule.contains = opt_string(r, "contains");
                rule.output = opt_string(r, "output");
                rule.fail = opt_string(r, "fail");
                if (r.contains("fail_times")) rule.fail_times = opt_int(r, "fail_times", 0);
                rule.latency_ms = opt_int(r, "latency_ms", ms.latency_ms);
                ms.rules.push_back(std::move(rule));
            }
        }
        models_.emplace(it.key(), std::move(ms));
    }
}

std::string StubProvider::seeded_answer(long long seed, const std::string& model_name, const Prompt& prompt) {
    auto digest = sha256_hex(std::to_string(seed) + "|" + model_name + "|" + prompt.context_fingerprint);
    auto byte = [&](size_t i) { return static_cast<unsigned>(std::stoul(digest.substr(i * 2, 2), nullptr, 16)); };

    ParsedPrediction p;
    p.confidence = 1 + static_cast<int>(byte(1) % 5);
    if (prompt.task == TaskKind::VotePrediction) {
        unsigned r = byte(0) % 10;
        p.label = r < 5 ? Label::For : (r < 9 ? Label::Against : Label::Abstain);
        p.reasoning = std::string(kVoteCues[byte(2) % kVoteCues.size()]) + "." +
                      std::string(kVoteHedges[byte(3) % kVoteHedges.size()]) + " Overall this reads as " +
                      std::string(to_string(p.label)) + ".";
    } else {
        p.label = byte(0) % 2 ? Label::Male : Label::Female;
        p.reasoning = "The speaker uses " + std::string(kStyles[byte(2) % kStyles.size()]) + " language and focuses on " +
                      std::string(kTopics[byte(3) % kTopics.size()]) + " issues, which suggests a " +
                      (p.label == Label::Male ? "male" : "female") + " speaker.";
    }
    return format_answer(p);
}

RawResponse StubProvider::complete(const ModelSpec& model, const Prompt& prompt, const GenerationParams& params,
                                   std::chrono::milliseconds timeout) {
    std::optional<std::string> failure;
    std::optional<std::string> output;
    int latency_ms = 0;
    {
        std::lock_guard lock(mu_);
        calls_.push_back({model.model_name, prompt.context_fingerprint, prompt.system_text, prompt.user_text, params});
        if (auto it = models_.find(model.model_name); it != models_.end()) {
            auto& ms = it->second;
            latency_ms = ms.latency_ms;
            failure = ms.fail;
            for (auto& rule : ms.rules) {
                if (rule.speech_id && *rule.speech_id != prompt.speech_id) continue;
                if (rule.contains && prompt.user_text.find(*rule.contains) == std::string::npos) continue;
                ++rule.hits;
                latency_ms = rule.latency_ms;
                failure.reset();
                if (rule.fail && (!rule.fail_times || rule.hits <= *rule.fail_times)) failure = rule.fail;
                output = rule.output;
                break;
            }
        }
    }
    if (failure) raise_failure(*failure, model.model_name);
    if (latency_ms >= timeout.count()) raise_failure("timeout", model.model_name);
    if (latency_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms));

    RawResponse raw;
    raw.text = output ? *output : seeded_answer(seed_, model.model_name, prompt);
    raw.latency = std::chrono::milliseconds(latency_ms);
    raw.provider_id = model.provider_id;
    raw.model_name = model.model_name;
    raw.metadata = {{"stub", true}, {"temperature", params.temperature}, {"max_output_tokens", params.max_output_tokens}};
    return raw;
}

std::vector<StubProvider::Call> StubProvider::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

size_t StubProvider::call_count() const {
    std::lock_guard lock(mu_);
    return calls_.size();
}

}  // namespace parlvote::llm
