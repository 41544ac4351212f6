#pragma once

#include "parlvote/bias/lexicon.hpp"
#include "parlvote/store/prediction_store.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace parlvote::bias {

using store::PredictionRecord;
using store::PredictionStore;

class AnalysisError : public std::runtime_error {
public:
    enum class Kind { WrongTask, InvalidThreshold, InvalidRuleset };
    AnalysisError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// A wrong prediction, kept with its reasoning trace.
struct ErrorCase {
    PredictionRecord record;
    const std::string& reasoning() const { return record.parsed.reasoning; }
};

inline constexpr int kDefaultConfidenceThreshold = 4;

/// Every stored prediction with correct == false and confidence >= threshold,
/// optionally restricted to one task and one model. Threshold must be 1..5.
std::vector<ErrorCase> high_confidence_errors(const PredictionStore& store, std::optional<llm::TaskKind> task,
                                              int threshold = kDefaultConfidenceThreshold,
                                              std::optional<std::string> model = std::nullopt);

/// Case level: a term counts once per error case whose reasoning mentions
/// any of its forms. Mention level: every whole-word occurrence counts.
enum class CountingMode { CaseLevel, MentionLevel };

struct TermRow {
    std::string term;
    Gender assumed_gender = Gender::Male;
    long occurrences = 0;
    bool operator==(const TermRow&) const = default;
};

struct TopicRow {
    std::string keyword;
    Gender stereotype_gender = Gender::Male;
    long male_pred_count = 0;
    long female_pred_count = 0;
    long total = 0;
    bool operator==(const TopicRow&) const = default;
};

/// Rows with zero occurrences omitted; sorted by occurrences descending,
/// then term ascending.
std::vector<TermRow> count_stereotype_terms(const std::vector<ErrorCase>& errors, const StereotypeLexicon& lexicon,
                                            CountingMode mode = CountingMode::CaseLevel);

/// Gender-task cases only (AnalysisError::WrongTask otherwise). Keywords with
/// total 0 omitted; sorted by total descending, then keyword ascending.
std::vector<TopicRow> topic_gender_association(const std::vector<ErrorCase>& errors, const TopicLexicon& lexicon,
                                               CountingMode mode = CountingMode::CaseLevel);

enum class FailureCategory { KeywordReliance, CriticismAsReform, UncertaintyDefaultFor, Other };
std::string_view to_string(FailureCategory c);  // keyword_reliance, ...

/// Trigger lists behind classify_failure. Loaded from a versioned JSON
/// document:
///
///     {"version": "failure-rules-v1",
///      "keyword_reliance": {"against_triggers": [...], "for_triggers": [...]},
///      "criticism_as_reform": {"criticism_markers": [...], "reform_markers": [...]},
///      "uncertainty_default_for": {"uncertainty_markers": [...]}}
struct FailureRuleset {
    std::string version;
    std::vector<std::string> against_triggers;
    std::vector<std::string> for_triggers;
    std::vector<std::string> criticism_markers;
    std::vector<std::string> reform_markers;
    std::vector<std::string> uncertainty_markers;

    static FailureRuleset from_json(const nlohmann::json& doc);
    static FailureRuleset load(const std::filesystem::path& path);
};

/// Multi-label. KeywordReliance: the reasoning cites a trigger phrase whose
/// usual direction equals the predicted vote (against-triggers with Against,
/// for-triggers with For). CriticismAsReform: predicted For while the
/// reasoning holds both a criticism marker and a reform marker.
/// UncertaintyDefaultFor: predicted For while the reasoning holds an
/// uncertainty marker. Other iff nothing fires. Vote-task cases only.
std::set<FailureCategory> classify_failure(const ErrorCase& c, const FailureRuleset& rules);

struct FailureRow {
    std::string model;
    FailureCategory category = FailureCategory::KeywordReliance;
    double pct = 0.0;
};

struct ModelErrorSummary {
    std::string model;
    long n_errors = 0;
    double other_pct = 0.0;
};

struct FailureDistribution {
    std::string ruleset_version;
    std::vector<FailureRow> rows;             // three chart categories per model
    std::vector<ModelErrorSummary> summary;   // error count and Other share per model
};

/// Percent of each model's vote-task errors carrying each category. Gender
/// cases are ignored. `models` restricts and orders the output (empty: all
/// models present, ascending). Models with zero errors are omitted.
FailureDistribution failure_distribution(const std::vector<ErrorCase>& errors, const FailureRuleset& rules,
                                         const std::vector<std::string>& models = {});

void write_term_table_csv(std::ostream& out, const std::vector<TermRow>& rows);
void write_topic_table_csv(std::ostream& out, const std::vector<TopicRow>& rows);
void write_failure_chart_csv(std::ostream& out, const FailureDistribution& dist);
void write_failure_summary_csv(std::ostream& out, const FailureDistribution& dist);

nlohmann::json to_json(const std::vector<TermRow>& rows);
nlohmann::json to_json(const std::vector<TopicRow>& rows);
nlohmann::json to_json(const FailureDistribution& dist);

}  // namespace parlvote::bias
