#include "parlvote/corpus.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <functional>

namespace parlvote {

using nlohmann::json;

namespace {

struct LineContext {
    std::string file;
    size_t line = 0;

    [[noreturn]] void fail(const std::string& reason, const std::string& id = {}) const {
        throw CorpusError(CorpusError::Kind::MalformedRecord,
                          file + ":" + std::to_string(line) + ": " + reason, file, line, id);
    }
};

std::string get_string(const json& rec, const char* key, const LineContext& ctx) {
    auto it = rec.find(key);
    if (it == rec.end() || !it->is_string()) ctx.fail(std::string("missing or non-string field '") + key + "'");
    return it->get<std::string>();
}

Date get_date(const json& rec, const char* key, const LineContext& ctx) {
    auto raw = get_string(rec, key, ctx);
    auto d = parse_date(raw);
    if (!d) ctx.fail(std::string("field '") + key + "' is not a YYYY-MM-DD date: " + raw);
    return *d;
}

void for_each_record(const std::filesystem::path& dir, std::string_view name,
                     const std::function<void(const json&, const LineContext&)>& fn) {
    auto path = dir / name;
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw CorpusError(CorpusError::Kind::MissingFile, "missing corpus file: " + path.string(),
                          path.string());
    LineContext ctx{std::string(name), 0};
    std::string line;
    while (std::getline(in, line)) {
        ++ctx.line;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            ctx.fail(std::string("invalid JSON: ") + e.what());
        }
        if (!rec.is_object()) ctx.fail("record is not an object");
        fn(rec, ctx);
    }
}

template <typename T>
void insert_unique(std::map<std::string, T>& m, T value, const LineContext& ctx) {
    std::string id = value.id;
    if (id.empty()) ctx.fail("empty id");
    if (!m.emplace(id, std::move(value)).second) ctx.fail("duplicate id " + id, id);
}

void write_lines(const std::filesystem::path& path, const std::vector<json>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CorpusError(CorpusError::Kind::MissingFile, "cannot write " + path.string(), path.string());
    for (const auto& r : records) out << r.dump() << '\n';
}

}  // namespace

Corpus read_corpus_files(const std::filesystem::path& dir) {
    Corpus c;
    for_each_record(dir, kGroupsFile, [&](const json& r, const LineContext& ctx) {
        PoliticalGroup g;
        g.id = get_string(r, "id", ctx);
        g.name = get_string(r, "name", ctx);
        auto ord = r.find("lr_ordinal");
        if (ord == r.end() || !ord->is_number_integer()) ctx.fail("missing or non-integer 'lr_ordinal'", g.id);
        g.lr_ordinal = ord->get<int>();
        insert_unique(c.groups, std::move(g), ctx);
    });
    for_each_record(dir, kMepsFile, [&](const json& r, const LineContext& ctx) {
        Mep m;
        m.id = get_string(r, "id", ctx);
        m.full_name = get_string(r, "full_name", ctx);
        auto gender = parse_gender(get_string(r, "gender", ctx));
        if (!gender) ctx.fail("gender must be Male or Female", m.id);
        m.gender = *gender;
        m.birth_date = get_date(r, "birth_date", ctx);
        m.country = get_string(r, "country", ctx);
        if (m.country.size() != 2 || m.country[0] < 'A' || m.country[0] > 'Z' || m.country[1] < 'A' ||
            m.country[1] > 'Z')
            ctx.fail("country must be an ISO-3166 alpha-2 code", m.id);
        m.group_id = get_string(r, "group_id", ctx);
        insert_unique(c.meps, std::move(m), ctx);
    });
    for_each_record(dir, kDebatesFile, [&](const json& r, const LineContext& ctx) {
        Debate d;
        d.id = get_string(r, "id", ctx);
        d.title = get_string(r, "title", ctx);
        d.topic = get_string(r, "topic", ctx);
        d.date = get_date(r, "date", ctx);
        d.report_id = get_string(r, "report_id", ctx);
        insert_unique(c.debates, std::move(d), ctx);
    });
    for_each_record(dir, kSpeechesFile, [&](const json& r, const LineContext& ctx) {
        Speech s;
        s.id = get_string(r, "id", ctx);
        s.debate_id = get_string(r, "debate_id", ctx);
        s.mep_id = get_string(r, "mep_id", ctx);
        s.text = get_string(r, "text", ctx);
        if (s.text.find_first_not_of(" \t\r\n\f\v") == std::string::npos) ctx.fail("empty speech text", s.id);
        insert_unique(c.speeches, std::move(s), ctx);
    });
    for_each_record(dir, kRollCallsFile, [&](const json& r, const LineContext& ctx) {
        RollCall rc;
        rc.id = get_string(r, "id", ctx);
        rc.debate_id = get_string(r, "debate_id", ctx);
        rc.date = get_date(r, "date", ctx);
        auto outcome = parse_outcome(get_string(r, "outcome", ctx));
        if (!outcome) ctx.fail("outcome must be Adopted or Rejected", rc.id);
        rc.outcome = *outcome;
        auto recs = r.find("records");
        if (recs == r.end() || !recs->is_array()) ctx.fail("missing 'records' array", rc.id);
        for (const auto& v : *recs) {
            if (!v.is_object()) ctx.fail("vote record is not an object", rc.id);
            VoteRecord vr;
            vr.mep_id = get_string(v, "mep_id", ctx);
            auto choice = parse_vote_choice(get_string(v, "choice", ctx));
            if (!choice) ctx.fail("choice must be For, Against or Abstain", rc.id);
            vr.choice = *choice;
            rc.records.push_back(std::move(vr));
        }
        insert_unique(c.roll_calls, std::move(rc), ctx);
    });
    return c;
}

Corpus load_corpus(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw CorpusError(CorpusError::Kind::MissingFile, "corpus directory not found: " + dir.string(),
                          dir.string());
    Corpus c = read_corpus_files(dir);
    auto report = validate_corpus(c);
    for (const auto& v : report.violations) {
        if (v.rule == "dangling_reference")
            throw CorpusError(CorpusError::Kind::DanglingReference,
                              v.record_kind + " " + v.record_id + " references missing " + v.detail, {}, 0,
                              v.record_id, v.detail);
    }
    if (!report.ok()) {
        const auto& v = report.violations.front();
        throw CorpusError(CorpusError::Kind::InvariantViolation,
                          v.record_kind + " " + v.record_id + ": " + v.rule + " " + v.detail, {}, 0, v.record_id,
                          v.detail);
    }
    return c;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<json> rows;
    for (const auto& [id, g] : corpus.groups)
        rows.push_back({{"id", g.id}, {"name", g.name}, {"lr_ordinal", g.lr_ordinal}});
    write_lines(dir / kGroupsFile, rows);

    rows.clear();
    for (const auto& [id, m] : corpus.meps)
        rows.push_back({{"id", m.id},
                        {"full_name", m.full_name},
                        {"gender", to_string(m.gender)},
                        {"birth_date", format_date(m.birth_date)},
                        {"country", m.country},
                        {"group_id", m.group_id}});
    write_lines(dir / kMepsFile, rows);

    rows.clear();
    for (const auto& [id, d] : corpus.debates)
        rows.push_back({{"id", d.id},
                        {"title", d.title},
                        {"topic", d.topic},
                        {"date", format_date(d.date)},
                        {"report_id", d.report_id}});
    write_lines(dir / kDebatesFile, rows);

    rows.clear();
    for (const auto& [id, s] : corpus.speeches)
        rows.push_back({{"id", s.id}, {"debate_id", s.debate_id}, {"mep_id", s.mep_id}, {"text", s.text}});
    write_lines(dir / kSpeechesFile, rows);

    rows.clear();
    for (const auto& [id, rc] : corpus.roll_calls) {
        json recs = json::array();
        for (const auto& r : rc.records) recs.push_back({{"mep_id", r.mep_id}, {"choice", to_string(r.choice)}});
        rows.push_back({{"id", rc.id},
                        {"debate_id", rc.debate_id},
                        {"date", format_date(rc.date)},
                        {"outcome", to_string(rc.outcome)},
                        {"records", std::move(recs)}});
    }
    write_lines(dir / kRollCallsFile, rows);
}

}  // namespace parlvote
