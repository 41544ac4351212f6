#include "parlvote/aggregation.hpp"

#include "parlvote/util/text.hpp"

#include <algorithm>
#include <map>

namespace parlvote {

std::string_view to_string(PivotKey p) {
    switch (p) {
        case PivotKey::PoliticalGroup: return "political_group";
        case PivotKey::Country: return "country";
        case PivotKey::Gender: return "gender";
        case PivotKey::AgeBucket: return "age";
    }
    return "?";
}

std::string_view to_string(AgeBucket b) {
    switch (b) {
        case AgeBucket::Under40: return "under_40";
        case AgeBucket::From40To54: return "40_to_54";
        case AgeBucket::From55To64: return "55_to_64";
        case AgeBucket::Over64: return "over_64";
    }
    return "?";
}

std::optional<PivotKey> parse_pivot(std::string_view s) {
    for (auto p : {PivotKey::PoliticalGroup, PivotKey::Country, PivotKey::Gender, PivotKey::AgeBucket})
        if (s == to_string(p)) return p;
    return std::nullopt;
}

std::optional<AgeBucket> parse_age_bucket(std::string_view s) {
    for (auto b : {AgeBucket::Under40, AgeBucket::From40To54, AgeBucket::From55To64, AgeBucket::Over64})
        if (s == to_string(b)) return b;
    return std::nullopt;
}

std::string_view to_string(VoteSort s) {
    switch (s) {
        case VoteSort::DateDesc: return "date_desc";
        case VoteSort::DateAsc: return "date_asc";
        case VoteSort::TitleAsc: return "title_asc";
        case VoteSort::ParticipantsDesc: return "participants_desc";
    }
    return "?";
}

std::optional<VoteSort> parse_vote_sort(std::string_view s) {
    for (auto v : {VoteSort::DateDesc, VoteSort::DateAsc, VoteSort::TitleAsc, VoteSort::ParticipantsDesc})
        if (s == to_string(v)) return v;
    return std::nullopt;
}

AgeBucket age_bucket_for_age(int age) {
    if (age < 40) return AgeBucket::Under40;
    if (age < 55) return AgeBucket::From40To54;
    if (age < 65) return AgeBucket::From55To64;
    return AgeBucket::Over64;
}

AgeBucket age_bucket_of(const Mep& mep, const Date& at_date) {
    int age = age_in_years(mep.birth_date, at_date);
    if (age < 0 || std::chrono::sys_days{at_date} < std::chrono::sys_days{mep.birth_date})
        throw AggregationError(AggregationError::Kind::NegativeAge,
                               "date " + format_date(at_date) + " precedes birth of " + mep.id);
    return age_bucket_for_age(age);
}

void ChoiceCounts::add(VoteChoice c) {
    switch (c) {
        case VoteChoice::For: ++count_for; break;
        case VoteChoice::Against: ++count_against; break;
        case VoteChoice::Abstain: ++count_abstain; break;
    }
}

Breakdown vote_breakdown(const Corpus& corpus, std::string_view roll_call_id, PivotKey pivot) {
    const RollCall* rc = corpus.find_roll_call(roll_call_id);
    if (!rc)
        throw AggregationError(AggregationError::Kind::UnknownRollCall,
                               "unknown roll call: " + std::string(roll_call_id));

    // Sort key per row; the label is what callers see.
    std::map<std::pair<long, std::string>, ChoiceCounts> rows;
    Breakdown out{rc->id, pivot, {}, {}};
    for (const auto& rec : rc->records) {
        const Mep* mep = corpus.find_mep(rec.mep_id);
        if (!mep) throw CorpusError(CorpusError::Kind::DanglingReference, "roll call references missing MEP",
                                    {}, 0, rc->id, rec.mep_id);
        std::pair<long, std::string> key;
        switch (pivot) {
            case PivotKey::PoliticalGroup: {
                const PoliticalGroup* g = corpus.find_group(mep->group_id);
                key = {g ? g->lr_ordinal : 0, mep->group_id};
                break;
            }
            case PivotKey::Country: key = {0, mep->country}; break;
            case PivotKey::Gender:
                key = {static_cast<long>(mep->gender), std::string(to_string(mep->gender))};
                break;
            case PivotKey::AgeBucket: {
                auto b = age_bucket_of(*mep, rc->date);
                key = {static_cast<long>(b), std::string(to_string(b))};
                break;
            }
        }
        rows[key].add(rec.choice);
        out.totals.add(rec.choice);
    }
    out.rows.reserve(rows.size());
    for (auto& [key, counts] : rows) out.rows.push_back({key.second, counts});
    return out;
}

VotePage search_votes(const Corpus& corpus, const VoteIndexQuery& q) {
    if (q.page_size < 1 || q.page_size > VoteIndexQuery::kMaxPageSize)
        throw AggregationError(AggregationError::Kind::InvalidQuery, "page_size must be within [1, 200]");
    if (q.page < 0) throw AggregationError(AggregationError::Kind::InvalidQuery, "page must be >= 0");

    std::vector<VoteSummary> matches;
    for (const auto& [id, rc] : corpus.roll_calls) {
        const Debate* d = corpus.find_debate(rc.debate_id);
        std::string title = d ? d->title : std::string();
        std::string topic = d ? d->topic : std::string();
        if (q.text_query && !q.text_query->empty() &&
            !text::icontains(title, *q.text_query) && !text::icontains(topic, *q.text_query))
            continue;
        if (q.year && static_cast<int>(rc.date.year()) != *q.year) continue;
        if (q.topic && !text::iequals(topic, *q.topic)) continue;
        matches.push_back({rc.id, rc.debate_id, title, topic, rc.date, rc.participant_count(), rc.outcome});
    }

    auto days = [](const Date& d) { return std::chrono::sys_days{d}; };
    std::sort(matches.begin(), matches.end(), [&](const VoteSummary& a, const VoteSummary& b) {
        switch (q.sort) {
            case VoteSort::DateDesc:
                if (a.date != b.date) return days(a.date) > days(b.date);
                break;
            case VoteSort::DateAsc:
                if (a.date != b.date) return days(a.date) < days(b.date);
                break;
            case VoteSort::TitleAsc:
                if (a.title != b.title) return a.title < b.title;
                break;
            case VoteSort::ParticipantsDesc:
                if (a.participant_count != b.participant_count) return a.participant_count > b.participant_count;
                break;
        }
        return a.id < b.id;
    });

    VotePage page;
    page.total = matches.size();
    page.page = q.page;
    page.page_size = q.page_size;
    if (static_cast<size_t>(q.page) >= matches.size()) return page;
    auto start = static_cast<size_t>(q.page) * static_cast<size_t>(q.page_size);
    if (start < matches.size()) {
        auto end = std::min(matches.size(), start + static_cast<size_t>(q.page_size));
        page.items.assign(std::make_move_iterator(matches.begin() + static_cast<long>(start)),
                          std::make_move_iterator(matches.begin() + static_cast<long>(end)));
    }
    return page;
}

}  // namespace parlvote
