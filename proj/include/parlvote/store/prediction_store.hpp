#pragma once

#include "parlvote/aggregation.hpp"
#include "parlvote/corpus.hpp"
#include "parlvote/llm/context.hpp"
#include "parlvote/llm/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace parlvote::store {

using llm::Label;
using llm::TaskKind;

/// Ground-truth demographics of the speaker, frozen at write time.
struct SpeakerSnapshot {
    Gender gender = Gender::Male;
    std::string group_id;
    std::string country;
    AgeBucket age_bucket = AgeBucket::Under40;
    bool operator==(const SpeakerSnapshot&) const = default;
};

struct PredictionRecord {
    std::string record_id;
    TaskKind task = TaskKind::VotePrediction;
    std::string speech_id;
    std::string mep_id;
    std::optional<std::string> roll_call_id;  // vote task only
    llm::ModelSpec model;
    std::string context_fingerprint;
    llm::ResolvedContext context;
    llm::ParsedPrediction parsed;
    Label ground_truth = Label::For;
    bool correct = false;
    SpeakerSnapshot speaker;
    std::string created_at;  // ISO-8601 UTC, millisecond precision

    bool operator==(const PredictionRecord&) const = default;
};

nlohmann::json to_json(const PredictionRecord& r);
/// Throws StoreError(StorageFailure) on schema or derived-field violations.
PredictionRecord record_from_json(const nlohmann::json& j);

class StoreError : public std::runtime_error {
public:
    enum class Kind { StorageFailure, DanglingReference, InvalidRecord };
    StoreError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct RecordFilter {
    std::optional<TaskKind> task;
    std::optional<std::string> model;  // "provider/model"
    std::optional<bool> correct;
    std::optional<int> min_confidence;
    std::optional<int> max_confidence;
    std::optional<Gender> gender;
    std::optional<std::string> group_id;
    std::optional<std::string> country;
    std::optional<AgeBucket> age_bucket;
    std::optional<std::string> speech_id;
    std::optional<std::string> roll_call_id;
    std::optional<std::string> context_fingerprint;

    bool matches(const PredictionRecord& r) const;
};

enum class GroupBy { Gender, PoliticalGroup, Country, AgeBucket, Model };
std::string_view to_string(GroupBy g);  // gender, political_group, country, age, model
std::optional<GroupBy> parse_group_by(std::string_view s);

struct MetricsRow {
    std::string group;
    long n = 0;
    long n_correct = 0;
    double accuracy = 0.0;
    bool operator==(const MetricsRow&) const = default;
};

struct MetricsTable {
    GroupBy group_by = GroupBy::Gender;
    std::vector<MetricsRow> rows;
    long total() const;
};

/// CSV columns: group,n,n_correct,accuracy (accuracy with 4 decimals).
void write_metrics_csv(std::ostream& out, const MetricsTable& table);

/// Gender-task truth x predicted counts. Index 0 = Male, 1 = Female.
struct GenderConfusion {
    long counts[2][2] = {{0, 0}, {0, 0}};

    long cell(Gender truth, Gender predicted) const {
        return counts[static_cast<int>(truth)][static_cast<int>(predicted)];
    }
    long row_total(Gender truth) const;
    long total() const;
    /// cell(Female, Male) / row(Female); 0 when there are no female speakers.
    double female_as_male_rate() const;
    double male_as_female_rate() const;
};

MetricsTable accuracy_breakdown(const std::vector<PredictionRecord>& records, GroupBy group_by);
GenderConfusion misclassification_matrix(const std::vector<PredictionRecord>& records);

inline constexpr std::string_view kLogFormat = "parlvote-prediction-log";
inline constexpr int kLogVersion = 1;

/// Append-only prediction log. The file holds a versioned header line and
/// one JSON record per line; the in-memory index is rebuilt on open. A torn
/// final line (crash mid-write) is dropped and truncated away on open.
/// One writer at a time; readers only see acknowledged records.
class PredictionStore {
public:
    /// In-memory store (nothing persisted).
    PredictionStore();
    /// Opens or creates the log at `path`.
    explicit PredictionStore(const std::filesystem::path& path);
    ~PredictionStore();

    PredictionStore(const PredictionStore&) = delete;
    PredictionStore& operator=(const PredictionStore&) = delete;

    /// Validates references against `corpus`, snapshots ground truth and
    /// speaker demographics, derives `correct`, assigns id and timestamp,
    /// then appends. Returns the new record id.
    std::string record(const PredictionRecord& draft, const Corpus& corpus);

    std::optional<PredictionRecord> get(std::string_view record_id) const;
    /// Conjunctive filter, ordered by (created_at, record_id).
    std::vector<PredictionRecord> query(const RecordFilter& filter = {}) const;
    size_t size() const;

    MetricsTable accuracy_breakdown(const RecordFilter& filter, GroupBy group_by) const;
    GenderConfusion misclassification_matrix(const RecordFilter& filter) const;

    /// Overrides the timestamp source (tests).
    void set_clock(std::function<std::string()> clock);

    const std::optional<std::filesystem::path>& path() const { return path_; }

private:
    void append_line(const std::string& line);

    std::optional<std::filesystem::path> path_;
    std::FILE* file_ = nullptr;
    std::vector<PredictionRecord> records_;
    std::map<std::string, size_t, std::less<>> by_id_;
    std::function<std::string()> clock_;
    mutable std::shared_mutex mu_;
};

/// Earliest roll call of the speech's debate in which the speaker voted;
/// the default ground truth for vote-task predictions. nullptr if none.
const RollCall* default_roll_call(const Corpus& corpus, const Speech& speech);

/// Current UTC time, e.g. "2025-03-01T12:00:00.123Z".
std::string utc_timestamp_now();

}  // namespace parlvote::store
