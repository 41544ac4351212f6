#include "parlvote/bias/analysis.hpp"

#include "parlvote/util/csv.hpp"

#include <algorithm>
#include <fstream>

namespace parlvote::bias {

std::vector<ErrorCase> high_confidence_errors(const PredictionStore& store, std::optional<llm::TaskKind> task,
                                              int threshold, std::optional<std::string> model) {
    if (threshold < 1 || threshold > 5)
        throw AnalysisError(AnalysisError::Kind::InvalidThreshold, "threshold must be in 1..5");
    store::RecordFilter f;
    f.task = task;
    f.model = std::move(model);
    f.correct = false;
    f.min_confidence = threshold;
    std::vector<ErrorCase> out;
    for (auto& r : store.query(f)) out.push_back(ErrorCase{std::move(r)});
    return out;
}

namespace {

long hits(const LexiconEntry& e, std::string_view normalized, CountingMode mode) {
    if (mode == CountingMode::CaseLevel) return e.matches(normalized) ? 1 : 0;
    return static_cast<long>(e.mentions(normalized));
}

}  // namespace

std::vector<TermRow> count_stereotype_terms(const std::vector<ErrorCase>& errors, const StereotypeLexicon& lexicon,
                                            CountingMode mode) {
    const auto& entries = lexicon.entries();
    std::vector<long> counts(entries.size(), 0);
    for (const auto& c : errors) {
        auto text = normalize_for_matching(c.reasoning());
        for (size_t i = 0; i < entries.size(); ++i) counts[i] += hits(entries[i], text, mode);
    }
    std::vector<TermRow> rows;
    for (size_t i = 0; i < entries.size(); ++i)
        if (counts[i] > 0) rows.push_back({entries[i].term, entries[i].gender, counts[i]});
    std::sort(rows.begin(), rows.end(), [](const TermRow& a, const TermRow& b) {
        if (a.occurrences != b.occurrences) return a.occurrences > b.occurrences;
        return a.term < b.term;
    });
    return rows;
}

std::vector<TopicRow> topic_gender_association(const std::vector<ErrorCase>& errors, const TopicLexicon& lexicon,
                                               CountingMode mode) {
    for (const auto& c : errors)
        if (c.record.task != llm::TaskKind::GenderPrediction)
            throw AnalysisError(AnalysisError::Kind::WrongTask,
                                "topic association needs gender-task cases; got " + c.record.record_id);
    const auto& entries = lexicon.entries();
    std::vector<TopicRow> rows(entries.size());
    for (size_t i = 0; i < entries.size(); ++i) {
        rows[i].keyword = entries[i].term;
        rows[i].stereotype_gender = entries[i].gender;
    }
    for (const auto& c : errors) {
        auto text = normalize_for_matching(c.reasoning());
        bool male = c.record.parsed.label == llm::Label::Male;
        for (size_t i = 0; i < entries.size(); ++i) {
            long n = hits(entries[i], text, mode);
            (male ? rows[i].male_pred_count : rows[i].female_pred_count) += n;
        }
    }
    std::vector<TopicRow> out;
    for (auto& r : rows) {
        r.total = r.male_pred_count + r.female_pred_count;
        if (r.total > 0) out.push_back(std::move(r));
    }
    std::sort(out.begin(), out.end(), [](const TopicRow& a, const TopicRow& b) {
        if (a.total != b.total) return a.total > b.total;
        return a.keyword < b.keyword;
    });
    return out;
}

std::string_view to_string(FailureCategory c) {
    switch (c) {
        case FailureCategory::KeywordReliance: return "keyword_reliance";
        case FailureCategory::CriticismAsReform: return "criticism_as_reform";
        case FailureCategory::UncertaintyDefaultFor: return "uncertainty_default_for";
        case FailureCategory::Other: return "other";
    }
    return "other";
}

namespace {

std::vector<std::string> phrase_list(const nlohmann::json& doc, const char* section, const char* key) {
    auto invalid = [&](const std::string& why) {
        return AnalysisError(AnalysisError::Kind::InvalidRuleset,
                             std::string("ruleset ") + section + "." + key + ": " + why);
    };
    if (!doc.contains(section) || !doc.at(section).is_object()) throw invalid("missing section");
    const auto& sec = doc.at(section);
    if (!sec.contains(key) || !sec.at(key).is_array()) throw invalid("missing phrase list");
    std::vector<std::string> out;
    for (const auto& p : sec.at(key)) {
        if (!p.is_string()) throw invalid("phrases must be strings");
        auto n = normalize_for_matching(p.get<std::string>());
        if (n.empty()) throw invalid("empty phrase");
        out.push_back(std::move(n));
    }
    return out;
}

bool any_phrase(std::string_view text, const std::vector<std::string>& phrases) {
    return std::any_of(phrases.begin(), phrases.end(), [&](const auto& p) { return contains_phrase(text, p); });
}

}  // namespace

FailureRuleset FailureRuleset::from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("version") || !doc.at("version").is_string() ||
        doc.at("version").get<std::string>().empty())
        throw AnalysisError(AnalysisError::Kind::InvalidRuleset, "ruleset needs a non-empty string version");
    FailureRuleset r;
    r.version = doc.at("version").get<std::string>();
    r.against_triggers = phrase_list(doc, "keyword_reliance", "against_triggers");
    r.for_triggers = phrase_list(doc, "keyword_reliance", "for_triggers");
    r.criticism_markers = phrase_list(doc, "criticism_as_reform", "criticism_markers");
    r.reform_markers = phrase_list(doc, "criticism_as_reform", "reform_markers");
    r.uncertainty_markers = phrase_list(doc, "uncertainty_default_for", "uncertainty_markers");
    return r;
}

FailureRuleset FailureRuleset::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw AnalysisError(AnalysisError::Kind::InvalidRuleset, "cannot read ruleset " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw AnalysisError(AnalysisError::Kind::InvalidRuleset, path.string() + ": " + e.what());
    }
    return from_json(doc);
}

std::set<FailureCategory> classify_failure(const ErrorCase& c, const FailureRuleset& rules) {
    if (c.record.task != llm::TaskKind::VotePrediction)
        throw AnalysisError(AnalysisError::Kind::WrongTask,
                            "failure classification needs vote-task cases; got " + c.record.record_id);
    auto text = normalize_for_matching(c.reasoning());
    auto predicted = c.record.parsed.label;
    std::set<FailureCategory> out;
    if ((predicted == llm::Label::Against && any_phrase(text, rules.against_triggers)) ||
        (predicted == llm::Label::For && any_phrase(text, rules.for_triggers)))
        out.insert(FailureCategory::KeywordReliance);
    if (predicted == llm::Label::For && any_phrase(text, rules.criticism_markers) &&
        any_phrase(text, rules.reform_markers))
        out.insert(FailureCategory::CriticismAsReform);
    if (predicted == llm::Label::For && any_phrase(text, rules.uncertainty_markers))
        out.insert(FailureCategory::UncertaintyDefaultFor);
    if (out.empty()) out.insert(FailureCategory::Other);
    return out;
}

FailureDistribution failure_distribution(const std::vector<ErrorCase>& errors, const FailureRuleset& rules,
                                         const std::vector<std::string>& models) {
    struct Tally {
        long n = 0;
        long by_cat[4] = {0, 0, 0, 0};
    };
    std::map<std::string, Tally> tallies;
    for (const auto& c : errors) {
        if (c.record.task != llm::TaskKind::VotePrediction) continue;
        auto& t = tallies[c.record.model.id()];
        ++t.n;
        for (auto cat : classify_failure(c, rules)) ++t.by_cat[static_cast<int>(cat)];
    }

    std::vector<std::string> order = models;
    if (order.empty())
        for (const auto& [m, _] : tallies) order.push_back(m);

    FailureDistribution dist;
    dist.ruleset_version = rules.version;
    for (const auto& m : order) {
        auto it = tallies.find(m);
        if (it == tallies.end() || it->second.n == 0) continue;
        const auto& t = it->second;
        auto pct = [&](FailureCategory cat) { return 100.0 * t.by_cat[static_cast<int>(cat)] / t.n; };
        for (auto cat : {FailureCategory::KeywordReliance, FailureCategory::CriticismAsReform,
                         FailureCategory::UncertaintyDefaultFor})
            dist.rows.push_back({m, cat, pct(cat)});
        dist.summary.push_back({m, t.n, pct(FailureCategory::Other)});
    }
    return dist;
}

void write_term_table_csv(std::ostream& out, const std::vector<TermRow>& rows) {
    csv::write_row(out, {"term", "assumed_gender", "occurrences"});
    for (const auto& r : rows)
        csv::write_row(out, {r.term, std::string(to_string(r.assumed_gender)), std::to_string(r.occurrences)});
}

void write_topic_table_csv(std::ostream& out, const std::vector<TopicRow>& rows) {
    csv::write_row(out, {"keyword", "stereotype_gender", "male_pred", "female_pred", "total"});
    for (const auto& r : rows)
        csv::write_row(out, {r.keyword, std::string(to_string(r.stereotype_gender)),
                             std::to_string(r.male_pred_count), std::to_string(r.female_pred_count),
                             std::to_string(r.total)});
}

void write_failure_chart_csv(std::ostream& out, const FailureDistribution& dist) {
    csv::write_row(out, {"model", "category", "pct", "ruleset_version"});
    for (const auto& r : dist.rows)
        csv::write_row(out, {r.model, std::string(to_string(r.category)), csv::fixed(r.pct, 2), dist.ruleset_version});
}

void write_failure_summary_csv(std::ostream& out, const FailureDistribution& dist) {
    csv::write_row(out, {"model", "n_errors", "other_pct", "ruleset_version"});
    for (const auto& s : dist.summary)
        csv::write_row(out, {s.model, std::to_string(s.n_errors), csv::fixed(s.other_pct, 2), dist.ruleset_version});
}

nlohmann::json to_json(const std::vector<TermRow>& rows) {
    auto arr = nlohmann::json::array();
    for (const auto& r : rows)
        arr.push_back({{"term", r.term}, {"assumed_gender", to_string(r.assumed_gender)}, {"occurrences", r.occurrences}});
    return arr;
}

nlohmann::json to_json(const std::vector<TopicRow>& rows) {
    auto arr = nlohmann::json::array();
    for (const auto& r : rows)
        arr.push_back({{"keyword", r.keyword},
                       {"stereotype_gender", to_string(r.stereotype_gender)},
                       {"male_pred_count", r.male_pred_count},
                       {"female_pred_count", r.female_pred_count},
                       {"total", r.total}});
    return arr;
}

nlohmann::json to_json(const FailureDistribution& dist) {
    auto rows = nlohmann::json::array();
    for (const auto& r : dist.rows)
        rows.push_back({{"model", r.model}, {"category", to_string(r.category)}, {"pct", r.pct}});
    auto summary = nlohmann::json::array();
    for (const auto& s : dist.summary)
        summary.push_back({{"model", s.model}, {"n_errors", s.n_errors}, {"other_pct", s.other_pct}});
    return {{"ruleset_version", dist.ruleset_version}, {"rows", rows}, {"summary", summary}};
}

}  // namespace parlvote::bias
