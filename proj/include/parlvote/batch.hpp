#pragma once

#include "parlvote/bias/analysis.hpp"
#include "parlvote/corpus.hpp"
#include "parlvote/llm/gateway.hpp"
#include "parlvote/store/prediction_store.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace parlvote::batch {

struct SweepOptions {
    llm::TaskKind task = llm::TaskKind::VotePrediction;
    std::vector<std::string> models;  // "provider/model"
    llm::ContextConfig context;
    llm::GenerationParams params;
    std::optional<size_t> limit;
    std::optional<std::uint64_t> seed;  // with limit: sample speeches instead of taking the first ones
    bool rerun = false;
    size_t speeches_in_flight = 4;
};

struct ModelTally {
    std::string model;
    long recorded = 0;
    long correct = 0;
    long failed = 0;
    long skipped = 0;
};

struct SweepSummary {
    std::vector<ModelTally> models;  // in sweep order
    long recorded() const;
    long failed() const;
    long skipped() const;
};

/// Speeches a sweep can score, ordered by id. Vote-task speeches need a
/// recorded vote by their speaker in a roll call of the same debate.
std::vector<std::string> eligible_speeches(const Corpus& corpus, llm::TaskKind task);

/// The speech ids a sweep visits, after `limit` and `seed`.
std::vector<std::string> select_speeches(const Corpus& corpus, const SweepOptions& options);

using SweepLog = std::function<void(const std::string&)>;

/// Scores every (speech, model) pair in speech-id x model-id order and
/// appends one record per success. Pairs whose fingerprint is already stored
/// for the same model are skipped unless `rerun`. Provider failures are
/// logged and counted; the sweep continues.
SweepSummary run_sweep(const Corpus& corpus, store::PredictionStore& store, const llm::Gateway& gateway,
                       const SweepOptions& options, const SweepLog& log = {});

struct ReportOptions {
    int threshold = bias::kDefaultConfidenceThreshold;
    bias::CountingMode counting = bias::CountingMode::CaseLevel;
};

/// File names written by write_reports.
inline constexpr std::string_view kStereotypeTermsCsv = "stereotype_terms.csv";
inline constexpr std::string_view kTopicGenderCsv = "topic_gender.csv";
inline constexpr std::string_view kFailureCategoriesCsv = "failure_categories.csv";
inline constexpr std::string_view kFailureSummaryCsv = "failure_summary.csv";
inline constexpr std::string_view kGenderConfusionCsv = "gender_confusion.csv";

/// Writes the analysis tables and accuracy_<task>_by_<grouping>.csv for
/// every task and grouping. Output depends only on the store contents.
/// Returns the written file names in write order.
std::vector<std::string> write_reports(const store::PredictionStore& store, const bias::StereotypeLexicon& stereotypes,
                                       const bias::TopicLexicon& topics, const bias::FailureRuleset& rules,
                                       const std::filesystem::path& dir, const ReportOptions& options = {});

}  // namespace parlvote::batch
