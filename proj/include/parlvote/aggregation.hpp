#pragma once

#include "parlvote/corpus.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace parlvote {

enum class PivotKey { PoliticalGroup, Country, Gender, AgeBucket };

// Whole-year age at the roll-call date; lower bounds inclusive, upper exclusive.
enum class AgeBucket { Under40, From40To54, From55To64, Over64 };

std::string_view to_string(PivotKey p);
std::string_view to_string(AgeBucket b);
/// Accepts the API spellings: political_group, country, gender, age.
std::optional<PivotKey> parse_pivot(std::string_view s);
std::optional<AgeBucket> parse_age_bucket(std::string_view s);

class AggregationError : public std::runtime_error {
public:
    enum class Kind { UnknownRollCall, NegativeAge, InvalidQuery };
    AggregationError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

AgeBucket age_bucket_for_age(int age);
/// Throws AggregationError(NegativeAge) when at_date precedes the birth date.
AgeBucket age_bucket_of(const Mep& mep, const Date& at_date);

struct ChoiceCounts {
    long count_for = 0;
    long count_against = 0;
    long count_abstain = 0;

    void add(VoteChoice c);
    long total() const { return count_for + count_against + count_abstain; }
    bool operator==(const ChoiceCounts&) const = default;
};

struct BreakdownRow {
    std::string label;
    ChoiceCounts counts;
    bool operator==(const BreakdownRow&) const = default;
};

struct Breakdown {
    std::string roll_call_id;
    PivotKey pivot = PivotKey::PoliticalGroup;
    std::vector<BreakdownRow> rows;
    ChoiceCounts totals;
};

/// Rows cover every participant exactly once. Row order: political groups by
/// lr_ordinal, countries by code, genders Male then Female, age buckets
/// youngest first. Subgroups with no participants are omitted.
Breakdown vote_breakdown(const Corpus& corpus, std::string_view roll_call_id,
                         PivotKey pivot = PivotKey::PoliticalGroup);

enum class VoteSort { DateDesc, DateAsc, TitleAsc, ParticipantsDesc };
std::optional<VoteSort> parse_vote_sort(std::string_view s);
std::string_view to_string(VoteSort s);

struct VoteIndexQuery {
    std::optional<std::string> text_query;  // case-insensitive substring of title or topic
    std::optional<int> year;
    std::optional<std::string> topic;  // case-insensitive exact topic
    VoteSort sort = VoteSort::DateDesc;
    long page = 0;
    long page_size = 20;

    static constexpr long kMaxPageSize = 200;
};

struct VoteSummary {
    std::string id;
    std::string debate_id;
    std::string title;
    std::string topic;
    Date date{};
    size_t participant_count = 0;
    Outcome outcome = Outcome::Adopted;
    bool operator==(const VoteSummary&) const = default;
};

struct VotePage {
    std::vector<VoteSummary> items;
    size_t total = 0;
    long page = 0;
    long page_size = 0;
};

/// Filters conjunctively, sorts with roll-call id as the final tiebreak, then
/// pages. Throws AggregationError(InvalidQuery) on out-of-range paging.
VotePage search_votes(const Corpus& corpus, const VoteIndexQuery& query);

}  // namespace parlvote
