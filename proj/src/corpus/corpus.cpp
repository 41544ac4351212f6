#include "parlvote/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace parlvote {

std::optional<Date> parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    auto digits = [&](size_t from, size_t len) -> std::optional<int> {
        int v = 0;
        for (size_t i = from; i < from + len; ++i) {
            if (text[i] < '0' || text[i] > '9') return std::nullopt;
            v = v * 10 + (text[i] - '0');
        }
        return v;
    };
    auto y = digits(0, 4), m = digits(5, 2), d = digits(8, 2);
    if (!y || !m || !d) return std::nullopt;
    Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
              std::chrono::day{static_cast<unsigned>(*d)}};
    if (!date.ok()) return std::nullopt;
    return date;
}

std::string format_date(const Date& date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

std::string_view to_string(Gender g) { return g == Gender::Male ? "Male" : "Female"; }

std::string_view to_string(VoteChoice c) {
    switch (c) {
        case VoteChoice::For: return "For";
        case VoteChoice::Against: return "Against";
        case VoteChoice::Abstain: return "Abstain";
    }
    return "?";
}

std::string_view to_string(Outcome o) { return o == Outcome::Adopted ? "Adopted" : "Rejected"; }

std::optional<Gender> parse_gender(std::string_view s) {
    if (s == "Male") return Gender::Male;
    if (s == "Female") return Gender::Female;
    return std::nullopt;
}

std::optional<VoteChoice> parse_vote_choice(std::string_view s) {
    if (s == "For") return VoteChoice::For;
    if (s == "Against") return VoteChoice::Against;
    if (s == "Abstain") return VoteChoice::Abstain;
    return std::nullopt;
}

std::optional<Outcome> parse_outcome(std::string_view s) {
    if (s == "Adopted") return Outcome::Adopted;
    if (s == "Rejected") return Outcome::Rejected;
    return std::nullopt;
}

const VoteRecord* RollCall::record_for(std::string_view mep_id) const {
    for (const auto& r : records)
        if (r.mep_id == mep_id) return &r;
    return nullptr;
}

namespace {
template <typename T>
const T* find_in(const std::map<std::string, T>& m, std::string_view id) {
    auto it = m.find(std::string(id));
    return it == m.end() ? nullptr : &it->second;
}
}  // namespace

const Debate* Corpus::find_debate(std::string_view id) const { return find_in(debates, id); }
const Speech* Corpus::find_speech(std::string_view id) const { return find_in(speeches, id); }
const Mep* Corpus::find_mep(std::string_view id) const { return find_in(meps, id); }
const PoliticalGroup* Corpus::find_group(std::string_view id) const { return find_in(groups, id); }
const RollCall* Corpus::find_roll_call(std::string_view id) const { return find_in(roll_calls, id); }

std::vector<const RollCall*> Corpus::roll_calls_for_debate(std::string_view debate_id) const {
    std::vector<const RollCall*> out;
    for (const auto& [id, rc] : roll_calls)
        if (rc.debate_id == debate_id) out.push_back(&rc);
    std::stable_sort(out.begin(), out.end(), [](const RollCall* a, const RollCall* b) {
        return std::chrono::sys_days{a->date} < std::chrono::sys_days{b->date};
    });
    return out;
}

CorpusError::CorpusError(Kind kind, std::string message, std::string file, size_t line,
                         std::string record_id, std::string target)
    : std::runtime_error(std::move(message)),
      kind_(kind),
      file_(std::move(file)),
      line_(line),
      record_id_(std::move(record_id)),
      target_(std::move(target)) {}

ValidationReport validate_corpus(const Corpus& corpus) {
    ValidationReport report;
    auto add = [&](std::string kind, const std::string& id, std::string rule, std::string detail) {
        report.violations.push_back({std::move(kind), id, std::move(rule), std::move(detail)});
    };

    std::map<int, std::string> ordinals;
    for (const auto& [key, g] : corpus.groups) {
        if (key != g.id) add("group", key, "key_mismatch", g.id);
        auto [it, inserted] = ordinals.emplace(g.lr_ordinal, g.id);
        if (!inserted) add("group", g.id, "duplicate_lr_ordinal", it->second);
    }
    for (const auto& [key, m] : corpus.meps) {
        if (key != m.id) add("mep", key, "key_mismatch", m.id);
        if (!corpus.find_group(m.group_id)) add("mep", m.id, "dangling_reference", m.group_id);
    }
    for (const auto& [key, d] : corpus.debates) {
        if (key != d.id) add("debate", key, "key_mismatch", d.id);
    }
    for (const auto& [key, s] : corpus.speeches) {
        if (key != s.id) add("speech", key, "key_mismatch", s.id);
        if (!corpus.find_debate(s.debate_id)) add("speech", s.id, "dangling_reference", s.debate_id);
        if (!corpus.find_mep(s.mep_id)) add("speech", s.id, "dangling_reference", s.mep_id);
        if (s.text.find_first_not_of(" \t\r\n\f\v") == std::string::npos)
            add("speech", s.id, "empty_text", "");
    }
    for (const auto& [key, rc] : corpus.roll_calls) {
        if (key != rc.id) add("roll_call", key, "key_mismatch", rc.id);
        if (!corpus.find_debate(rc.debate_id)) add("roll_call", rc.id, "dangling_reference", rc.debate_id);
        std::set<std::string> seen;
        for (const auto& rec : rc.records) {
            const Mep* mep = corpus.find_mep(rec.mep_id);
            if (!mep) {
                add("roll_call", rc.id, "dangling_reference", rec.mep_id);
                continue;
            }
            if (!seen.insert(rec.mep_id).second) add("roll_call", rc.id, "duplicate_vote_record", rec.mep_id);
            if (std::chrono::sys_days{mep->birth_date} >= std::chrono::sys_days{rc.date})
                add("roll_call", rc.id, "birth_date_not_before_vote", rec.mep_id);
        }
    }
    return report;
}

std::vector<std::pair<const Speech*, const Mep*>> speeches_for_debate(const Corpus& corpus,
                                                                      std::string_view debate_id) {
    if (!corpus.find_debate(debate_id))
        throw CorpusError(CorpusError::Kind::UnknownDebate, "unknown debate: " + std::string(debate_id),
                          {}, 0, std::string(debate_id));
    std::vector<std::pair<const Speech*, const Mep*>> out;
    // speeches is keyed by id, so iteration is already in speech-id order
    for (const auto& [id, s] : corpus.speeches)
        if (s.debate_id == debate_id) out.emplace_back(&s, corpus.find_mep(s.mep_id));
    return out;
}

int age_in_years(const Date& birth, const Date& at) {
    int years = static_cast<int>(at.year()) - static_cast<int>(birth.year());
    auto before_birthday = std::pair{static_cast<unsigned>(at.month()), static_cast<unsigned>(at.day())} <
                           std::pair{static_cast<unsigned>(birth.month()), static_cast<unsigned>(birth.day())};
    if (before_birthday) --years;
    return years;
}

}  // namespace parlvote
