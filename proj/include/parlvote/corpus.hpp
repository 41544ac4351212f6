#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace parlvote {

using Date = std::chrono::year_month_day;

/// Parses a strict ISO-8601 calendar date (`YYYY-MM-DD`). Returns nullopt on
/// any malformed or non-existent date.
std::optional<Date> parse_date(std::string_view text);
std::string format_date(const Date& date);

enum class Gender { Male, Female };
enum class VoteChoice { For, Against, Abstain };
enum class Outcome { Adopted, Rejected };

std::string_view to_string(Gender g);
std::string_view to_string(VoteChoice c);
std::string_view to_string(Outcome o);
std::optional<Gender> parse_gender(std::string_view s);
std::optional<VoteChoice> parse_vote_choice(std::string_view s);
std::optional<Outcome> parse_outcome(std::string_view s);

struct PoliticalGroup {
    std::string id;
    std::string name;
    // 0 is furthest left; strictly increasing rightward.
    int lr_ordinal = 0;
    bool operator==(const PoliticalGroup&) const = default;
};

struct Mep {
    std::string id;
    std::string full_name;
    Gender gender = Gender::Male;
    Date birth_date{};
    std::string country;  // ISO-3166 alpha-2
    std::string group_id;
    bool operator==(const Mep&) const = default;
};

struct Debate {
    std::string id;
    std::string title;
    std::string topic;
    Date date{};
    std::string report_id;
    bool operator==(const Debate&) const = default;
};

struct Speech {
    std::string id;
    std::string debate_id;
    std::string mep_id;
    std::string text;
    bool operator==(const Speech&) const = default;
};

struct VoteRecord {
    std::string mep_id;
    VoteChoice choice = VoteChoice::For;
    bool operator==(const VoteRecord&) const = default;
};

struct RollCall {
    std::string id;
    std::string debate_id;
    Date date{};
    Outcome outcome = Outcome::Adopted;
    std::vector<VoteRecord> records;

    size_t participant_count() const { return records.size(); }
    const VoteRecord* record_for(std::string_view mep_id) const;
    bool operator==(const RollCall&) const = default;
};

/// The linked dataset. Collections are keyed by id and ordered, so iteration
/// order is deterministic. Treat a loaded corpus as read-only.
struct Corpus {
    std::map<std::string, Debate> debates;
    std::map<std::string, Speech> speeches;
    std::map<std::string, Mep> meps;
    std::map<std::string, PoliticalGroup> groups;
    std::map<std::string, RollCall> roll_calls;

    const Debate* find_debate(std::string_view id) const;
    const Speech* find_speech(std::string_view id) const;
    const Mep* find_mep(std::string_view id) const;
    const PoliticalGroup* find_group(std::string_view id) const;
    const RollCall* find_roll_call(std::string_view id) const;

    /// Roll calls attached to a debate, ordered by (date, id).
    std::vector<const RollCall*> roll_calls_for_debate(std::string_view debate_id) const;

    bool operator==(const Corpus&) const = default;
};

class CorpusError : public std::runtime_error {
public:
    enum class Kind { MissingFile, MalformedRecord, DanglingReference, InvariantViolation, UnknownDebate };

    CorpusError(Kind kind, std::string message, std::string file = {}, size_t line = 0,
                std::string record_id = {}, std::string target = {});

    Kind kind() const { return kind_; }
    const std::string& file() const { return file_; }
    size_t line() const { return line_; }
    const std::string& record_id() const { return record_id_; }
    const std::string& target() const { return target_; }

private:
    Kind kind_;
    std::string file_;
    size_t line_;
    std::string record_id_;
    std::string target_;
};

struct Violation {
    std::string record_kind;  // debate, speech, mep, group, roll_call
    std::string record_id;
    std::string rule;    // machine-readable rule name, e.g. "dangling_reference"
    std::string detail;  // offending value (missing target id, duplicated mep id, ...)
    bool operator==(const Violation&) const = default;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

/// File names, one per entity kind, inside a corpus directory.
inline constexpr std::string_view kGroupsFile = "groups.jsonl";
inline constexpr std::string_view kMepsFile = "meps.jsonl";
inline constexpr std::string_view kDebatesFile = "debates.jsonl";
inline constexpr std::string_view kSpeechesFile = "speeches.jsonl";
inline constexpr std::string_view kRollCallsFile = "roll_calls.jsonl";

/// Parses the record files without checking cross-record references. Throws
/// CorpusError (MissingFile, MalformedRecord) on I/O or syntax problems.
Corpus read_corpus_files(const std::filesystem::path& dir);

/// read_corpus_files + validate_corpus. Throws DanglingReference for the first
/// unresolved reference and InvariantViolation for any other broken rule.
Corpus load_corpus(const std::filesystem::path& dir);

ValidationReport validate_corpus(const Corpus& corpus);

/// Writes the canonical line-delimited form (records in id order).
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Speeches of a debate joined to their speaker, ordered by speech id.
std::vector<std::pair<const Speech*, const Mep*>> speeches_for_debate(const Corpus& corpus,
                                                                      std::string_view debate_id);

/// Whole years between two dates; negative when `at` precedes `birth`.
int age_in_years(const Date& birth, const Date& at);

}  // namespace parlvote
