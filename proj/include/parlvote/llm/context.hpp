#pragma once

#include "parlvote/corpus.hpp"
#include "parlvote/llm/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace parlvote::llm {

/// Speaker/debate attributes that can be added to a prompt. The enum order is
/// the order the attribute sentences appear in.
enum class Attribute { Topic, Gender, Age, Country, PoliticalGroup };

inline constexpr Attribute kAllAttributes[] = {Attribute::Topic, Attribute::Gender, Attribute::Age,
                                               Attribute::Country, Attribute::PoliticalGroup};

std::string_view to_string(Attribute a);  // topic, gender, age, country, political_group
std::optional<Attribute> parse_attribute(std::string_view s);

struct ContextConfig {
    bool include_topic = false;
    bool include_gender = false;
    bool include_age = false;
    bool include_country = false;
    bool include_political_group = false;
    // Counterfactual replacement values. Only included attributes may be overridden.
    std::map<Attribute, std::string> overrides;

    bool includes(Attribute a) const;
    void set_include(Attribute a, bool on);

    /// Throws GatewayError(InvalidConfig | IllegalOverride).
    void validate(TaskKind task) const;

    bool operator==(const ContextConfig&) const = default;
};

/// Parses the comma-separated flag list used on the command line, e.g.
/// "topic,gender". "speech" (or an empty string) selects the speech-only mode.
ContextConfig parse_context_flags(std::string_view flags);

struct ResolvedContext {
    TaskKind task = TaskKind::VotePrediction;
    std::string speech_id;
    // Only included attributes appear, in Attribute order.
    std::map<Attribute, std::string> values;
    std::vector<Attribute> overridden;

    bool operator==(const ResolvedContext&) const = default;
};

/// Looks up the ground-truth attribute values for the speaker and debate of
/// `speech_id` and applies the config's overrides. Age is whole years at the
/// debate date. Attribute values have their whitespace collapsed so each
/// renders on one line.
ResolvedContext resolve_context(const Corpus& corpus, std::string_view speech_id, TaskKind task,
                                const ContextConfig& config);

struct ContextDiffEntry {
    Attribute attribute;
    std::optional<std::string> before;
    std::optional<std::string> after;
    bool operator==(const ContextDiffEntry&) const = default;
};

std::vector<ContextDiffEntry> diff_contexts(const ResolvedContext& before, const ResolvedContext& after);

}  // namespace parlvote::llm
