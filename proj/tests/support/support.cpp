#include "support.hpp"

#include "parlvote/llm/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <fcntl.h>
#include <fstream>
#include <poll.h>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

namespace testsupport {

fs::path fixture_dir() { return PARLVOTE_FIXTURE_DIR; }
fs::path corpus_dir() { return fixture_dir() / "corpus"; }
fs::path golden_dir() { return PARLVOTE_GOLDEN_DIR; }
fs::path data_dir() { return PARLVOTE_TEST_DATA_DIR; }
fs::path schema_dir() { return PARLVOTE_SCHEMA_DIR; }
fs::path cli_path() { return PARLVOTE_CLI; }

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

TempDir::TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "parlvote-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

CommandResult run_command(const std::vector<std::string>& argv) {
    int out_pipe[2], err_pipe[2];
    if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0) throw std::runtime_error("pipe failed");
    pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("fork failed");
    if (pid == 0) {
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        close(out_pipe[0]);
        close(err_pipe[0]);
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        execv(args[0], args.data());
        _exit(127);
    }
    close(out_pipe[1]);
    close(err_pipe[1]);
    CommandResult r;
    pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    std::string* sinks[2] = {&r.out, &r.err};
    int open_fds = 2;
    char buf[4096];
    while (open_fds > 0) {
        if (poll(fds, 2, -1) < 0) break;
        for (int i = 0; i < 2; ++i) {
            if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP))) continue;
            ssize_t n = read(fds[i].fd, buf, sizeof buf);
            if (n > 0) {
                sinks[i]->append(buf, static_cast<size_t>(n));
            } else {
                close(fds[i].fd);
                fds[i].fd = -1;
                --open_fds;
            }
        }
    }
    int status = 0;
    waitpid(pid, &status, 0);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

const Corpus& fixture_corpus() {
    static const Corpus c = load_corpus(corpus_dir());
    return c;
}

namespace {

template <class T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
    return v[std::uniform_int_distribution<size_t>(0, v.size() - 1)(rng)];
}

int uniform(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Date make_date(int y, int m, int d) {
    return Date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                std::chrono::day{static_cast<unsigned>(d)}};
}

const std::vector<std::string> kWords = {"climate", "border", "budget", "farmers", "energy", "digital",
                                         "health",  "trade",  "rights", "fishing", "transport", "water"};
const std::vector<std::string> kCountries = {"AT", "BE", "DE", "ES", "FR", "IT", "NL", "PL", "SE"};

}  // namespace

Corpus random_corpus(std::mt19937_64& rng, const RandomCorpusOptions& o) {
    Corpus c;
    int n_groups = uniform(rng, 1, o.max_groups);
    std::vector<int> ordinals(n_groups);
    for (int i = 0; i < n_groups; ++i) ordinals[i] = i + 1;
    std::shuffle(ordinals.begin(), ordinals.end(), rng);
    for (int i = 0; i < n_groups; ++i) {
        PoliticalGroup g{"g" + std::to_string(i), "Group " + std::to_string(i), ordinals[i]};
        c.groups.emplace(g.id, g);
    }
    int n_meps = uniform(rng, 1, o.max_meps);
    for (int i = 0; i < n_meps; ++i) {
        Mep m;
        m.id = "m" + std::to_string(i);
        m.full_name = "Member " + std::to_string(i);
        m.gender = uniform(rng, 0, 1) ? Gender::Male : Gender::Female;
        m.birth_date = make_date(uniform(rng, 1940, 1998), uniform(rng, 1, 12), uniform(rng, 1, 28));
        m.country = pick(rng, kCountries);
        m.group_id = "g" + std::to_string(uniform(rng, 0, n_groups - 1));
        c.meps.emplace(m.id, m);
    }
    int n_rc = uniform(rng, 1, o.max_roll_calls);
    for (int i = 0; i < n_rc; ++i) {
        std::string debate_id;
        if (i > 0 && uniform(rng, 0, 4) == 0) {
            debate_id = std::next(c.debates.begin(), uniform(rng, 0, static_cast<int>(c.debates.size()) - 1))->first;
        } else {
            Debate d;
            d.id = "d" + std::to_string(i);
            d.title = pick(rng, kWords) + " " + pick(rng, kWords);
            d.topic = pick(rng, kWords);
            d.date = make_date(uniform(rng, 2019, 2024), uniform(rng, 1, 12), uniform(rng, 1, 28));
            d.report_id = "A9-" + std::to_string(1000 + i);
            c.debates.emplace(d.id, d);
            debate_id = d.id;
        }
        RollCall rc;
        rc.id = "rc" + std::to_string(i);
        rc.debate_id = debate_id;
        rc.date = c.debates.at(debate_id).date;
        rc.outcome = uniform(rng, 0, 1) ? Outcome::Adopted : Outcome::Rejected;
        for (const auto& [id, m] : c.meps) {
            if (uniform(rng, 0, 3) == 0) continue;  // absent
            static const VoteChoice choices[] = {VoteChoice::For, VoteChoice::Against, VoteChoice::Abstain};
            rc.records.push_back({id, choices[uniform(rng, 0, 2)]});
        }
        c.roll_calls.emplace(rc.id, rc);
    }
    int sid = 0;
    for (const auto& [did, d] : c.debates) {
        std::vector<std::string> voters;
        for (const auto* rc : c.roll_calls_for_debate(did))
            for (const auto& r : rc->records) voters.push_back(r.mep_id);
        if (voters.empty()) continue;
        int n = uniform(rng, 0, 3);
        for (int k = 0; k < n; ++k) {
            Speech s;
            s.id = "s" + std::to_string(sid++);
            s.debate_id = did;
            s.mep_id = pick(rng, voters);
            s.text = "On " + d.title + ", the " + pick(rng, kWords) + " question matters.";
            c.speeches.emplace(s.id, s);
        }
    }
    return c;
}

Corpus search_corpus(std::mt19937_64& rng, int n_votes) {
    RandomCorpusOptions o;
    o.max_meps = 12;
    o.max_roll_calls = 1;
    Corpus c = random_corpus(rng, o);
    c.debates.clear();
    c.roll_calls.clear();
    c.speeches.clear();
    static const std::vector<std::string> titles = {"Fisheries Agreement", "fisheries agreement", "Energy Union",
                                                    "Digital Markets",     "Budget 2024",         "Rule of Law"};
    static const std::vector<std::string> topics = {"Environment", "environment", "Economy", "Justice", "Energy"};
    for (int i = 0; i < n_votes; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "v%03d", i);
        Debate d{std::string("d") + id, pick(rng, titles), pick(rng, topics),
                 make_date(uniform(rng, 2020, 2023), uniform(rng, 1, 3), uniform(rng, 1, 3)), "R-" + std::to_string(i)};
        c.debates.emplace(d.id, d);
        RollCall rc;
        rc.id = id;
        rc.debate_id = d.id;
        rc.date = d.date;
        rc.outcome = Outcome::Adopted;
        int take = uniform(rng, 0, 4);
        for (const auto& [mid, m] : c.meps) {
            if (take-- <= 0) break;
            rc.records.push_back({mid, VoteChoice::For});
        }
        c.roll_calls.emplace(rc.id, rc);
    }
    return c;
}

store::PredictionRecord make_draft(const Corpus& corpus, const std::string& speech_id, llm::TaskKind task,
                                   const std::string& model, llm::Label label, int confidence,
                                   const std::string& reasoning, const llm::ContextConfig& config) {
    store::PredictionRecord d;
    d.task = task;
    d.speech_id = speech_id;
    auto slash = model.find('/');
    d.model = {model.substr(0, slash), model.substr(slash + 1), "stub"};
    auto prompt = llm::prepare_prompt(corpus, speech_id, task, config, &d.context);
    d.context_fingerprint = prompt.context_fingerprint;
    if (task == llm::TaskKind::VotePrediction)
        d.roll_call_id = store::default_roll_call(corpus, *corpus.find_speech(speech_id))->id;
    d.parsed = {label, confidence, reasoning};
    return d;
}

void seed_store(store::PredictionStore& st, const Corpus& corpus, std::mt19937_64& rng, int n,
                const std::vector<std::string>& models) {
    std::vector<std::string> vote_ok, all;
    for (const auto& [id, s] : corpus.speeches) {
        all.push_back(id);
        if (store::default_roll_call(corpus, s)) vote_ok.push_back(id);
    }
    if (all.empty()) throw std::runtime_error("seed_store needs speeches");
    static const llm::Label vote_labels[] = {llm::Label::For, llm::Label::Against, llm::Label::Abstain};
    for (int i = 0; i < n; ++i) {
        bool vote = !vote_ok.empty() && uniform(rng, 0, 1);
        auto task = vote ? llm::TaskKind::VotePrediction : llm::TaskKind::GenderPrediction;
        auto label = vote ? vote_labels[uniform(rng, 0, 2)] : (uniform(rng, 0, 1) ? llm::Label::Male : llm::Label::Female);
        auto speech = vote ? pick(rng, vote_ok) : pick(rng, all);
        st.record(make_draft(corpus, speech, task, pick(rng, models), label, uniform(rng, 1, 5),
                             "trace " + std::to_string(i)),
                  corpus);
    }
}

std::vector<bias::ErrorCase> load_trace_cases(const fs::path& jsonl) {
    std::vector<bias::ErrorCase> out;
    std::istringstream in(read_file(jsonl));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        bias::ErrorCase c;
        auto& r = c.record;
        char id[32];
        std::snprintf(id, sizeof id, "rec-%08zu", out.size() + 1);
        r.record_id = id;
        r.task = llm::TaskKind::GenderPrediction;
        r.model = {"fixture", "traces", "stub"};
        r.parsed.label = j.at("predicted") == "Male" ? llm::Label::Male : llm::Label::Female;
        r.parsed.confidence = j.at("confidence").get<int>();
        r.parsed.reasoning = j.at("reasoning").get<std::string>();
        r.ground_truth = r.parsed.label == llm::Label::Male ? llm::Label::Female : llm::Label::Male;
        r.correct = false;
        out.push_back(std::move(c));
    }
    return out;
}

bias::ErrorCase vote_error(llm::Label predicted, const std::string& reasoning, const std::string& model) {
    bias::ErrorCase c;
    auto& r = c.record;
    r.record_id = "rec-vote";
    r.task = llm::TaskKind::VotePrediction;
    auto slash = model.find('/');
    r.model = {model.substr(0, slash), model.substr(slash + 1), "stub"};
    r.roll_call_id = "rc1";
    r.parsed = {predicted, 5, reasoning};
    r.ground_truth = predicted == llm::Label::For ? llm::Label::Against : llm::Label::For;
    r.correct = false;
    return c;
}

ApiFixture::ApiFixture(std::string ui_origin) {
    corpus_ = std::make_shared<const Corpus>(load_corpus(fixture_dir() / "api_corpus"));
    store_ = std::make_shared<store::PredictionStore>(tmp_ / "predictions.log");
    auto registry = std::make_shared<const llm::ProviderRegistry>(llm::ProviderRegistry::load(fixture_dir() / "providers.json"));
    llm::RetryPolicy policy;
    policy.base_backoff = std::chrono::milliseconds(1);
    auto gateway = std::make_shared<const llm::Gateway>(registry, policy);
    auto analysis = std::make_shared<const api::AnalysisResources>(
        api::AnalysisResources{bias::StereotypeLexicon::load(data_dir() / "stereotype_terms.tsv"),
                               bias::TopicLexicon::load(data_dir() / "topic_keywords.tsv"),
                               bias::FailureRuleset::load(data_dir() / "failure_rules.json")});
    service_ = std::make_unique<api::ApiService>(corpus_, store_, gateway, analysis, std::move(ui_origin));
}

api::ApiResponse ApiFixture::call(const std::string& method, const std::string& path,
                                  std::map<std::string, std::string> query, const nlohmann::json& body) const {
    api::ApiRequest r{method, path, std::move(query), body.is_null() ? std::string() : body.dump()};
    return service_->handle(r);
}

// ---- oracles -------------------------------------------------------------

std::map<std::string, ChoiceCounts> oracle_breakdown(const Corpus& corpus, const RollCall& rc, PivotKey pivot) {
    std::map<std::string, ChoiceCounts> out;
    for (const auto& r : rc.records) {
        const Mep& m = corpus.meps.at(r.mep_id);
        std::string label;
        switch (pivot) {
            case PivotKey::PoliticalGroup: label = m.group_id; break;
            case PivotKey::Country: label = m.country; break;
            case PivotKey::Gender: label = m.gender == Gender::Male ? "Male" : "Female"; break;
            case PivotKey::AgeBucket: {
                int by = static_cast<int>(m.birth_date.year()), bm = static_cast<unsigned>(m.birth_date.month()),
                    bd = static_cast<unsigned>(m.birth_date.day());
                int y = static_cast<int>(rc.date.year()), mo = static_cast<unsigned>(rc.date.month()),
                    d = static_cast<unsigned>(rc.date.day());
                int age = y - by - ((mo * 100 + d) < (bm * 100 + bd) ? 1 : 0);
                label = age <= 39 ? "under_40" : age <= 54 ? "40_to_54" : age <= 64 ? "55_to_64" : "over_64";
                break;
            }
        }
        auto& c = out[label];
        if (r.choice == VoteChoice::For) ++c.count_for;
        else if (r.choice == VoteChoice::Against) ++c.count_against;
        else ++c.count_abstain;
    }
    return out;
}

namespace {
std::string lower(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}
}  // namespace

std::vector<std::string> oracle_search(const Corpus& corpus, const VoteIndexQuery& q) {
    struct Row {
        std::string id, title;
        int ymd;
        size_t participants;
    };
    std::vector<Row> rows;
    for (const auto& [id, rc] : corpus.roll_calls) {
        const auto& d = corpus.debates.at(rc.debate_id);
        if (q.text_query && !q.text_query->empty()) {
            auto needle = lower(*q.text_query);
            if (lower(d.title).find(needle) == std::string::npos && lower(d.topic).find(needle) == std::string::npos)
                continue;
        }
        int y = static_cast<int>(rc.date.year());
        if (q.year && y != *q.year) continue;
        if (q.topic && lower(d.topic) != lower(*q.topic)) continue;
        int ymd = y * 10000 + static_cast<int>(static_cast<unsigned>(rc.date.month())) * 100 +
                  static_cast<int>(static_cast<unsigned>(rc.date.day()));
        rows.push_back({id, d.title, ymd, rc.records.size()});
    }
    // Selection sort on an explicit "comes before" relation.
    auto before = [&](const Row& a, const Row& b) {
        switch (q.sort) {
            case VoteSort::DateDesc: if (a.ymd != b.ymd) return a.ymd > b.ymd; break;
            case VoteSort::DateAsc: if (a.ymd != b.ymd) return a.ymd < b.ymd; break;
            case VoteSort::TitleAsc: if (a.title != b.title) return a.title < b.title; break;
            case VoteSort::ParticipantsDesc: if (a.participants != b.participants) return a.participants > b.participants; break;
        }
        return a.id < b.id;
    };
    for (size_t i = 0; i < rows.size(); ++i) {
        size_t best = i;
        for (size_t j = i + 1; j < rows.size(); ++j)
            if (before(rows[j], rows[best])) best = j;
        std::swap(rows[i], rows[best]);
    }
    std::vector<std::string> out;
    long start = q.page * q.page_size;
    for (long i = start; i < static_cast<long>(rows.size()) && i < start + q.page_size; ++i) out.push_back(rows[i].id);
    return out;
}

std::vector<std::string> tokenize(const std::string& text) {
    // Word tokens are runs of ASCII letters, digits and bytes >= 0x80. Every
    // other byte is its own token, except that a whitespace run becomes one
    // " " token. U+2019 becomes "'".
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) tokens.push_back(cur);
        cur.clear();
    };
    for (size_t i = 0; i < text.size(); ++i) {
        unsigned char ch = static_cast<unsigned char>(text[i]);
        if (ch == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
            static_cast<unsigned char>(text[i + 2]) == 0x99) {
            flush();
            tokens.push_back("'");
            i += 2;
        } else if (std::isalnum(ch) || ch >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (std::isspace(ch)) {
            flush();
            if (tokens.empty() || tokens.back() != " ") tokens.push_back(" ");
        } else {
            flush();
            tokens.push_back(std::string(1, static_cast<char>(ch)));
        }
    }
    flush();
    return tokens;
}

bool token_walk_contains(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase) {
    return token_walk_count(tokens, phrase) > 0;
}

long token_walk_count(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase) {
    if (phrase.empty() || phrase.size() > tokens.size()) return 0;
    long n = 0;
    for (size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
        bool all = true;
        for (size_t k = 0; k < phrase.size() && all; ++k) all = tokens[i + k] == phrase[k];
        if (all) ++n;
    }
    return n;
}

std::vector<OracleLexiconEntry> read_lexicon_oracle(const fs::path& tsv) {
    std::vector<OracleLexiconEntry> out;
    std::istringstream in(read_file(tsv));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cols;
        std::string col;
        std::istringstream ls(line);
        while (std::getline(ls, col, '\t')) cols.push_back(col);
        OracleLexiconEntry e{lower(cols.at(0)), cols.at(1) == "Male" ? Gender::Male : Gender::Female, {lower(cols[0])}};
        if (cols.size() > 2) {
            std::istringstream fs_(cols[2]);
            std::string f;
            while (std::getline(fs_, f, ',')) e.forms.push_back(lower(f));
        }
        out.push_back(e);
    }
    return out;
}

std::map<std::string, long> oracle_term_counts(const std::vector<std::string>& traces,
                                               const std::vector<OracleLexiconEntry>& lexicon) {
    std::map<std::string, long> counts;
    for (const auto& t : traces) {
        auto tokens = tokenize(t);
        for (const auto& e : lexicon) {
            bool hit = false;
            for (const auto& f : e.forms) hit = hit || token_walk_contains(tokens, tokenize(f));
            if (hit) ++counts[e.term];
        }
    }
    return counts;
}

std::map<std::string, OracleTopicCounts> oracle_topic_counts(
    const std::vector<std::pair<std::string, llm::Label>>& traces, const std::vector<OracleLexiconEntry>& lexicon) {
    std::map<std::string, OracleTopicCounts> counts;
    for (const auto& [t, label] : traces) {
        auto tokens = tokenize(t);
        for (const auto& e : lexicon) {
            bool hit = false;
            for (const auto& f : e.forms) hit = hit || token_walk_contains(tokens, tokenize(f));
            if (!hit) continue;
            if (label == llm::Label::Male) ++counts[e.term].male;
            else ++counts[e.term].female;
        }
    }
    return counts;
}

// ---- JSON Schema (subset) ------------------------------------------------

namespace {

using nlohmann::json;

bool type_matches(const std::string& type, const json& v) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "integer") return v.is_number_integer();
    if (type == "number") return v.is_number();
    if (type == "boolean") return v.is_boolean();
    if (type == "null") return v.is_null();
    return false;
}

void check(const json& root, const json& schema, const json& v, const std::string& where,
           std::vector<std::string>& errors) {
    if (schema.contains("$ref")) {
        auto ref = schema.at("$ref").get<std::string>();
        const std::string prefix = "#/$defs/";
        if (ref.rfind(prefix, 0) != 0 || !root.contains("$defs") || !root.at("$defs").contains(ref.substr(prefix.size()))) {
            errors.push_back(where + ": unresolvable $ref " + ref);
            return;
        }
        check(root, root.at("$defs").at(ref.substr(prefix.size())), v, where, errors);
        return;
    }
    if (schema.contains("type")) {
        const auto& t = schema.at("type");
        bool ok = false;
        if (t.is_string()) ok = type_matches(t.get<std::string>(), v);
        else
            for (const auto& alt : t) ok = ok || type_matches(alt.get<std::string>(), v);
        if (!ok) {
            errors.push_back(where + ": expected type " + t.dump() + ", got " + v.type_name());
            return;
        }
    }
    if (schema.contains("enum")) {
        bool found = false;
        for (const auto& e : schema.at("enum")) found = found || e == v;
        if (!found) errors.push_back(where + ": " + v.dump() + " not in enum");
    }
    if (v.is_number()) {
        if (schema.contains("minimum") && v.get<double>() < schema.at("minimum").get<double>())
            errors.push_back(where + ": below minimum");
        if (schema.contains("maximum") && v.get<double>() > schema.at("maximum").get<double>())
            errors.push_back(where + ": above maximum");
    }
    if (v.is_string() && schema.contains("minLength") &&
        v.get<std::string>().size() < schema.at("minLength").get<size_t>())
        errors.push_back(where + ": shorter than minLength");
    if (v.is_array()) {
        if (schema.contains("minItems") && v.size() < schema.at("minItems").get<size_t>())
            errors.push_back(where + ": fewer than minItems");
        if (schema.contains("items"))
            for (size_t i = 0; i < v.size(); ++i)
                check(root, schema.at("items"), v[i], where + "[" + std::to_string(i) + "]", errors);
    }
    if (v.is_object()) {
        if (schema.contains("required"))
            for (const auto& k : schema.at("required"))
                if (!v.contains(k.get<std::string>())) errors.push_back(where + ": missing " + k.get<std::string>());
        json props = schema.value("properties", json::object());
        for (const auto& [k, sub] : v.items()) {
            if (props.contains(k)) check(root, props.at(k), sub, where + "." + k, errors);
            else if (schema.contains("additionalProperties") && schema.at("additionalProperties").is_boolean() &&
                     !schema.at("additionalProperties").get<bool>())
                errors.push_back(where + ": unexpected property " + k);
            else if (schema.contains("additionalProperties") && schema.at("additionalProperties").is_object())
                check(root, schema.at("additionalProperties"), sub, where + "." + k, errors);
        }
    }
}

}  // namespace

std::vector<std::string> schema_violations(const nlohmann::json& schema, const nlohmann::json& instance) {
    std::vector<std::string> errors;
    check(schema, schema, instance, "$", errors);
    return errors;
}

nlohmann::json load_schema(const std::string& name) {
    return nlohmann::json::parse(read_file(schema_dir() / (name + ".schema.json")));
}

}  // namespace testsupport
