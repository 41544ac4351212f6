#include "parlvote/llm/context.hpp"

#include "parlvote/util/text.hpp"

#include <charconv>

namespace parlvote::llm {

std::string_view to_string(Attribute a) {
    switch (a) {
        case Attribute::Topic: return "topic";
        case Attribute::Gender: return "gender";
        case Attribute::Age: return "age";
        case Attribute::Country: return "country";
        case Attribute::PoliticalGroup: return "political_group";
    }
    return "?";
}

std::optional<Attribute> parse_attribute(std::string_view s) {
    for (auto a : kAllAttributes)
        if (s == to_string(a)) return a;
    if (s == "group") return Attribute::PoliticalGroup;
    return std::nullopt;
}

bool ContextConfig::includes(Attribute a) const {
    switch (a) {
        case Attribute::Topic: return include_topic;
        case Attribute::Gender: return include_gender;
        case Attribute::Age: return include_age;
        case Attribute::Country: return include_country;
        case Attribute::PoliticalGroup: return include_political_group;
    }
    return false;
}

void ContextConfig::set_include(Attribute a, bool on) {
    switch (a) {
        case Attribute::Topic: include_topic = on; break;
        case Attribute::Gender: include_gender = on; break;
        case Attribute::Age: include_age = on; break;
        case Attribute::Country: include_country = on; break;
        case Attribute::PoliticalGroup: include_political_group = on; break;
    }
}

void ContextConfig::validate(TaskKind task) const {
    if (task == TaskKind::GenderPrediction) {
        if (include_gender)
            throw GatewayError(GatewayError::Kind::InvalidConfig, "gender cannot be given to the gender task");
        if (overrides.count(Attribute::Gender))
            throw GatewayError(GatewayError::Kind::IllegalOverride, "gender cannot be overridden in the gender task");
    }
    for (const auto& [attr, value] : overrides) {
        if (!includes(attr))
            throw GatewayError(GatewayError::Kind::IllegalOverride,
                               "override of excluded attribute " + std::string(to_string(attr)));
        if (text::collapse_whitespace(value).empty())
            throw GatewayError(GatewayError::Kind::IllegalOverride,
                               "empty override for " + std::string(to_string(attr)));
    }
}

ContextConfig parse_context_flags(std::string_view flags) {
    ContextConfig cfg;
    for (auto& raw : text::split(flags, ',')) {
        auto f = text::trim(raw);
        if (f.empty() || f == "speech") continue;
        auto a = parse_attribute(f);
        if (!a) throw GatewayError(GatewayError::Kind::InvalidConfig, "unknown context flag: " + f);
        cfg.set_include(*a, true);
    }
    return cfg;
}

namespace {

std::string canonical_override(Attribute a, const std::string& raw) {
    auto value = text::collapse_whitespace(raw);
    if (a == Attribute::Gender) {
        auto g = parse_label(value);
        if (!g || !label_in_task(*g, TaskKind::GenderPrediction))
            throw GatewayError(GatewayError::Kind::IllegalOverride, "gender override must be Male or Female");
        return std::string(to_string(*g));
    }
    if (a == Attribute::Age) {
        int age = -1;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), age);
        if (ec != std::errc{} || ptr != value.data() + value.size() || age < 18 || age > 120)
            throw GatewayError(GatewayError::Kind::IllegalOverride, "age override must be an integer in [18, 120]");
        return std::to_string(age);
    }
    return value;
}

}  // namespace

ResolvedContext resolve_context(const Corpus& corpus, std::string_view speech_id, TaskKind task,
                                const ContextConfig& config) {
    const Speech* speech = corpus.find_speech(speech_id);
    if (!speech) throw GatewayError(GatewayError::Kind::UnknownSpeech, "unknown speech: " + std::string(speech_id));
    config.validate(task);
    const Debate* debate = corpus.find_debate(speech->debate_id);
    const Mep* mep = corpus.find_mep(speech->mep_id);
    if (!debate || !mep)
        throw GatewayError(GatewayError::Kind::UnknownSpeech, "speech has unresolved references: " + speech->id);

    ResolvedContext out;
    out.task = task;
    out.speech_id = speech->id;
    for (auto a : kAllAttributes) {
        if (!config.includes(a)) continue;
        if (auto it = config.overrides.find(a); it != config.overrides.end()) {
            out.values[a] = canonical_override(a, it->second);
            out.overridden.push_back(a);
            continue;
        }
        std::string value;
        switch (a) {
            case Attribute::Topic: value = debate->topic; break;
            case Attribute::Gender: value = std::string(to_string(mep->gender)); break;
            case Attribute::Age: value = std::to_string(age_in_years(mep->birth_date, debate->date)); break;
            case Attribute::Country: value = mep->country; break;
            case Attribute::PoliticalGroup: {
                const PoliticalGroup* g = corpus.find_group(mep->group_id);
                value = g ? g->name : mep->group_id;
                break;
            }
        }
        out.values[a] = text::collapse_whitespace(value);
    }
    return out;
}

std::vector<ContextDiffEntry> diff_contexts(const ResolvedContext& before, const ResolvedContext& after) {
    std::vector<ContextDiffEntry> diff;
    for (auto a : kAllAttributes) {
        auto b = before.values.find(a);
        auto c = after.values.find(a);
        std::optional<std::string> bv, cv;
        if (b != before.values.end()) bv = b->second;
        if (c != after.values.end()) cv = c->second;
        if (bv != cv) diff.push_back({a, bv, cv});
    }
    return diff;
}

}  // namespace parlvote::llm
