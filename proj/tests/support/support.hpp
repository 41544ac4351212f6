#pragma once

// Test-only helpers: fixture paths, scratch directories, random corpora,
// brute-force oracles and a small JSON-Schema checker.

#include "parlvote/aggregation.hpp"
#include "parlvote/api/service.hpp"
#include "parlvote/bias/analysis.hpp"
#include "parlvote/corpus.hpp"
#include "parlvote/llm/gateway.hpp"
#include "parlvote/store/prediction_store.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

namespace fs = std::filesystem;
using namespace parlvote;

fs::path fixture_dir();   // tests/fixtures
fs::path corpus_dir();    // tests/fixtures/corpus
fs::path golden_dir();    // tests/golden
fs::path data_dir();      // bundled lexicons and ruleset
fs::path schema_dir();    // published API schemas
fs::path cli_path();      // built parlvote executable

std::string read_file(const fs::path& p);
void write_file(const fs::path& p, const std::string& content);

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs argv through /bin/sh-free fork/exec, capturing both streams.
CommandResult run_command(const std::vector<std::string>& argv);

const Corpus& fixture_corpus();

struct RandomCorpusOptions {
    int max_meps = 50;
    int max_roll_calls = 20;
    int max_groups = 6;
};

/// Valid corpus with random demographics and votes. Every roll call has its
/// own debate unless two share one; each debate gets up to three speeches by
/// members who voted on it.
Corpus random_corpus(std::mt19937_64& rng, const RandomCorpusOptions& options = {});

/// Corpus with exactly `n_votes` roll calls whose titles, topics and dates
/// collide often, to exercise sort tiebreaks.
Corpus search_corpus(std::mt19937_64& rng, int n_votes);

/// Appends `n` random predictions over `corpus` to `store` (both tasks,
/// random labels and confidences).
void seed_store(store::PredictionStore& store, const Corpus& corpus, std::mt19937_64& rng, int n,
                const std::vector<std::string>& models = {"stub/alpha", "stub/beta"});

/// Record draft with a real fingerprint for `speech_id`.
store::PredictionRecord make_draft(const Corpus& corpus, const std::string& speech_id, llm::TaskKind task,
                                   const std::string& model, llm::Label label, int confidence,
                                   const std::string& reasoning, const llm::ContextConfig& config = {});

/// Gender-task error cases read from a traces JSONL file
/// ({"predicted", "confidence", "reasoning"} per line; truth is the other label).
std::vector<bias::ErrorCase> load_trace_cases(const fs::path& jsonl);

/// Vote-task error case with the given prediction and reasoning.
bias::ErrorCase vote_error(llm::Label predicted, const std::string& reasoning, const std::string& model = "stub/alpha");

/// ApiService over tests/fixtures/api_corpus, the fixture stub registry,
/// the bundled analysis data and a fresh store in a scratch directory.
class ApiFixture {
public:
    explicit ApiFixture(std::string ui_origin = {});

    api::ApiResponse call(const std::string& method, const std::string& path,
                          std::map<std::string, std::string> query = {},
                          const nlohmann::json& body = nullptr) const;

    const api::ApiService& service() const { return *service_; }
    store::PredictionStore& store() { return *store_; }
    const Corpus& corpus() const { return *corpus_; }
    const fs::path& dir() const { return tmp_.path(); }

private:
    TempDir tmp_;
    std::shared_ptr<const Corpus> corpus_;
    std::shared_ptr<store::PredictionStore> store_;
    std::unique_ptr<api::ApiService> service_;
};

// ---- oracles -------------------------------------------------------------

/// Per-label choice counts computed by a direct scan, label derived without
/// the production pivot code.
std::map<std::string, ChoiceCounts> oracle_breakdown(const Corpus& corpus, const RollCall& rc, PivotKey pivot);

std::vector<std::string> oracle_search(const Corpus& corpus, const VoteIndexQuery& q);

/// Token-walk matcher: splits the text into word tokens and compares token
/// sequences, never using substring search.
std::vector<std::string> tokenize(const std::string& text);
bool token_walk_contains(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase);
long token_walk_count(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase);

struct OracleLexiconEntry {
    std::string term;
    Gender gender;
    std::vector<std::string> forms;
};
std::vector<OracleLexiconEntry> read_lexicon_oracle(const fs::path& tsv);

std::map<std::string, long> oracle_term_counts(const std::vector<std::string>& traces,
                                               const std::vector<OracleLexiconEntry>& lexicon);
struct OracleTopicCounts {
    long male = 0;
    long female = 0;
};
std::map<std::string, OracleTopicCounts> oracle_topic_counts(const std::vector<std::pair<std::string, llm::Label>>& traces,
                                                             const std::vector<OracleLexiconEntry>& lexicon);

// ---- JSON Schema (subset) ------------------------------------------------

/// Supports type, properties, required, additionalProperties (bool),
/// items, enum, minimum, maximum, minItems, minLength and local $ref into
/// "#/$defs/...". Returns human-readable violations; empty means valid.
std::vector<std::string> schema_violations(const nlohmann::json& schema, const nlohmann::json& instance);
nlohmann::json load_schema(const std::string& name);

}  // namespace testsupport
