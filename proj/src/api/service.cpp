#include "parlvote/api/service.hpp"

#include "parlvote/aggregation.hpp"
#include "parlvote/util/text.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <stdexcept>

#ifndef PARLVOTE_DEFAULT_DATA_DIR
#define PARLVOTE_DEFAULT_DATA_DIR "data"
#endif

namespace parlvote::api {

using nlohmann::json;

namespace {

struct HttpFailure {
    int status;
    std::string code;
    std::string message;
    json details = nullptr;
};

json error_body(const std::string& code, const std::string& message, const json& details = nullptr) {
    json e = {{"code", code}, {"message", message}};
    if (!details.is_null()) e["details"] = details;
    return {{"error", e}};
}

ApiResponse ok(json body, int status = 200) { return {status, std::move(body), {}}; }

[[noreturn]] void bad_request(const std::string& code, const std::string& message, json details = nullptr) {
    throw HttpFailure{400, code, message, std::move(details)};
}

std::optional<std::string> param(const ApiRequest& r, const std::string& key) {
    auto it = r.query.find(key);
    if (it == r.query.end()) return std::nullopt;
    return it->second;
}

long parse_long(std::string_view s, const std::string& name) {
    long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
        bad_request("InvalidQuery", name + " must be an integer");
    return v;
}

std::optional<long> long_param(const ApiRequest& r, const std::string& key) {
    auto v = param(r, key);
    if (!v || v->empty()) return std::nullopt;
    return parse_long(*v, key);
}

int threshold_param(const ApiRequest& r) {
    long t = long_param(r, "threshold").value_or(bias::kDefaultConfidenceThreshold);
    if (t < 1 || t > 5) bad_request("InvalidThreshold", "threshold must be in 1..5");
    return static_cast<int>(t);
}

std::optional<llm::TaskKind> task_param(const ApiRequest& r) {
    auto v = param(r, "task");
    if (!v || v->empty() || *v == "all") return std::nullopt;
    auto t = llm::parse_task(*v);
    if (!t) bad_request("InvalidQuery", "task must be vote, gender or all");
    return t;
}

bias::CountingMode counting_param(const ApiRequest& r) {
    auto v = param(r, "counting").value_or("case");
    if (v == "case") return bias::CountingMode::CaseLevel;
    if (v == "mention") return bias::CountingMode::MentionLevel;
    bad_request("InvalidQuery", "counting must be case or mention");
}

json parse_body(const ApiRequest& r) {
    json body;
    try {
        body = json::parse(r.body);
    } catch (const json::parse_error& e) {
        bad_request("InvalidBody", std::string("request body is not JSON: ") + e.what());
    }
    if (!body.is_object()) bad_request("InvalidBody", "request body must be a JSON object");
    return body;
}

std::string required_string(const json& body, const char* key) {
    if (!body.contains(key) || !body.at(key).is_string() || body.at(key).get<std::string>().empty())
        bad_request("InvalidBody", std::string(key) + " must be a non-empty string");
    return body.at(key).get<std::string>();
}

std::map<llm::Attribute, std::string> parse_overrides(const json& j) {
    if (!j.is_object()) bad_request("InvalidConfig", "overrides must be an object");
    std::map<llm::Attribute, std::string> out;
    for (const auto& [k, v] : j.items()) {
        auto a = llm::parse_attribute(k);
        if (!a) bad_request("InvalidConfig", "unknown attribute " + k);
        if (v.is_string())
            out[*a] = v.get<std::string>();
        else if (v.is_number_integer())
            out[*a] = std::to_string(v.get<long>());
        else
            bad_request("IllegalOverride", "override for " + k + " must be a string or integer");
    }
    return out;
}

/// {"include": ["topic", ...], "overrides": {"political_group": "..."}}
llm::ContextConfig parse_config(const json& j) {
    llm::ContextConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) bad_request("InvalidConfig", "context config must be an object");
    if (auto it = j.find("include"); it != j.end()) {
        if (!it->is_array()) bad_request("InvalidConfig", "include must be an array of attribute names");
        for (const auto& a : *it) {
            auto attr = a.is_string() ? llm::parse_attribute(a.get<std::string>()) : std::nullopt;
            if (!attr) bad_request("InvalidConfig", "unknown attribute " + a.dump());
            c.set_include(*attr, true);
        }
    }
    if (auto it = j.find("overrides"); it != j.end()) c.overrides = parse_overrides(*it);
    return c;
}

llm::GenerationParams parse_params(const json& body) {
    llm::GenerationParams p;
    auto it = body.find("params");
    if (it == body.end() || it->is_null()) return p;
    if (!it->is_object()) bad_request("InvalidParams", "params must be an object");
    if (auto t = it->find("temperature"); t != it->end()) {
        if (!t->is_number()) bad_request("InvalidParams", "temperature must be a number");
        p.temperature = t->get<double>();
    }
    if (auto m = it->find("max_output_tokens"); m != it->end()) {
        if (!m->is_number_integer()) bad_request("InvalidParams", "max_output_tokens must be an integer");
        p.max_output_tokens = m->get<int>();
    }
    p.validate();
    return p;
}

llm::TaskKind parse_task_field(const json& body) {
    auto t = llm::parse_task(required_string(body, "task"));
    if (!t) bad_request("InvalidBody", "task must be vote or gender");
    return *t;
}

std::vector<llm::ModelSpec> parse_models(const json& body, const llm::ProviderRegistry& registry) {
    if (!body.contains("models") || !body.at("models").is_array() || body.at("models").empty())
        bad_request("InvalidBody", "models must be a non-empty array of provider/model ids");
    std::vector<llm::ModelSpec> out;
    std::set<std::string> seen;
    for (const auto& m : body.at("models")) {
        if (!m.is_string()) bad_request("InvalidBody", "model ids must be strings");
        auto spec = registry.resolve(m.get<std::string>());
        if (!seen.insert(spec.id()).second) bad_request("InvalidBody", "duplicate model " + spec.id());
        out.push_back(std::move(spec));
    }
    return out;
}

json counts_json(const ChoiceCounts& c) {
    return {{"for", c.count_for}, {"against", c.count_against}, {"abstain", c.count_abstain}, {"total", c.total()}};
}

json summary_json(const VoteSummary& s) {
    return {{"id", s.id},
            {"debate_id", s.debate_id},
            {"title", s.title},
            {"topic", s.topic},
            {"date", format_date(s.date)},
            {"participant_count", s.participant_count},
            {"outcome", to_string(s.outcome)}};
}

json context_json(const llm::ResolvedContext& c) {
    json values = json::object();
    for (const auto& [a, v] : c.values) values[std::string(to_string(a))] = v;
    json overridden = json::array();
    for (auto a : c.overridden) overridden.push_back(to_string(a));
    return {{"values", values}, {"overridden", overridden}};
}

json outcome_json(const llm::ModelOutcome& o) {
    json j = {{"model", o.model.id()}};
    if (o.raw) {
        j["latency_ms"] = o.raw->latency.count();
        j["attempts"] = o.raw->attempts;
    }
    if (const auto* p = std::get_if<llm::ParsedPrediction>(&o.result)) {
        j["status"] = 200;
        j["label"] = to_string(p->label);
        j["confidence"] = p->confidence;
        j["reasoning"] = p->reasoning;
    } else {
        const auto& f = std::get<llm::ModelFailure>(o.result);
        j["status"] = 502;
        j["error"] = {{"code", to_string(f.kind)}, {"message", f.message}};
    }
    return j;
}

struct GroundTruth {
    llm::Label label;
    std::optional<std::string> roll_call_id;
};

GroundTruth ground_truth_for(const Corpus& corpus, const Speech& speech, llm::TaskKind task, const json& body) {
    const Mep* mep = corpus.find_mep(speech.mep_id);
    if (task == llm::TaskKind::GenderPrediction) {
        if (body.contains("roll_call_id") && !body.at("roll_call_id").is_null())
            bad_request("InvalidBody", "roll_call_id applies to the vote task only");
        return {llm::to_label(mep->gender), std::nullopt};
    }
    const RollCall* rc = nullptr;
    if (body.contains("roll_call_id") && !body.at("roll_call_id").is_null()) {
        rc = corpus.find_roll_call(required_string(body, "roll_call_id"));
        if (!rc || rc->debate_id != speech.debate_id)
            bad_request("NoGroundTruth", "roll call does not conclude the speech's debate");
    } else {
        rc = store::default_roll_call(corpus, speech);
    }
    if (!rc || !rc->record_for(mep->id))
        bad_request("NoGroundTruth", "speaker " + mep->id + " has no recorded vote for this debate");
    return {llm::to_label(rc->record_for(mep->id)->choice), rc->id};
}

}  // namespace

ApiConfig ApiConfig::from_json(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
    ApiConfig c;
    auto str = [&](const char* key, bool required) -> std::optional<std::string> {
        if (!doc.contains(key)) {
            if (required) throw std::invalid_argument(std::string("config is missing ") + key);
            return std::nullopt;
        }
        if (!doc.at(key).is_string()) throw std::invalid_argument(std::string("config ") + key + " must be a string");
        return doc.at(key).get<std::string>();
    };
    auto path = [&](const char* key, bool required, const std::filesystem::path& fallback) {
        auto v = str(key, required);
        if (!v) return fallback;
        std::filesystem::path p(*v);
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };
    if (auto v = str("bind_address", false)) c.bind_address = *v;
    if (doc.contains("port")) {
        if (!doc.at("port").is_number_integer()) throw std::invalid_argument("config port must be an integer");
        c.port = doc.at("port").get<int>();
        if (c.port < 0 || c.port > 65535) throw std::invalid_argument("config port out of range");
    }
    c.corpus_path = path("corpus_path", true, {});
    c.store_path = path("store_path", true, {});
    c.provider_registry_path = path("provider_registry_path", true, {});
    if (auto v = str("ui_origin", false)) c.ui_origin = *v;
    auto data = default_data_dir();
    c.stereotype_lexicon_path = path("stereotype_lexicon_path", false, data / "stereotype_terms.tsv");
    c.topic_lexicon_path = path("topic_lexicon_path", false, data / "topic_keywords.tsv");
    c.failure_rules_path = path("failure_rules_path", false, data / "failure_rules.json");
    if (doc.contains("request_deadline_ms")) {
        if (!doc.at("request_deadline_ms").is_number_integer() || doc.at("request_deadline_ms").get<long>() <= 0)
            throw std::invalid_argument("config request_deadline_ms must be a positive integer");
        c.request_deadline = std::chrono::milliseconds(doc.at("request_deadline_ms").get<long>());
    }
    return c;
}

ApiConfig ApiConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    return from_json(doc, path.parent_path());
}

std::filesystem::path default_data_dir() {
    if (const char* env = std::getenv("PARLVOTE_DATA_DIR"); env && *env) return env;
    return PARLVOTE_DEFAULT_DATA_DIR;
}

ServiceBundle load_service(const ApiConfig& config) {
    ServiceBundle b;
    b.config = config;
    b.corpus = std::make_shared<const Corpus>(load_corpus(config.corpus_path));
    b.store = std::make_shared<store::PredictionStore>(config.store_path);
    auto registry = std::make_shared<const llm::ProviderRegistry>(llm::ProviderRegistry::load(config.provider_registry_path));
    b.gateway = std::make_shared<const llm::Gateway>(registry);
    b.analysis = std::make_shared<const AnalysisResources>(
        AnalysisResources{bias::StereotypeLexicon::load(config.stereotype_lexicon_path),
                          bias::TopicLexicon::load(config.topic_lexicon_path),
                          bias::FailureRuleset::load(config.failure_rules_path)});
    b.service = std::make_unique<ApiService>(b.corpus, b.store, b.gateway, b.analysis, config.ui_origin,
                                             config.request_deadline);
    return b;
}

ApiService::ApiService(std::shared_ptr<const Corpus> corpus, std::shared_ptr<store::PredictionStore> store,
                       std::shared_ptr<const llm::Gateway> gateway, std::shared_ptr<const AnalysisResources> analysis,
                       std::string ui_origin, std::chrono::milliseconds deadline)
    : corpus_(std::move(corpus)),
      store_(std::move(store)),
      gateway_(std::move(gateway)),
      analysis_(std::move(analysis)),
      ui_origin_(std::move(ui_origin)),
      deadline_(deadline) {}

ApiResponse ApiService::handle(const ApiRequest& request) const {
    ApiResponse resp;
    try {
        resp = route(request);
    } catch (const HttpFailure& f) {
        resp = {f.status, error_body(f.code, f.message, f.details), {}};
    } catch (const llm::GatewayError& e) {
        int status = e.kind() == llm::GatewayError::Kind::UnknownSpeech ? 404 : 400;
        resp = {status, error_body(std::string(to_string(e.kind())), e.what()), {}};
    } catch (const AggregationError& e) {
        int status = e.kind() == AggregationError::Kind::UnknownRollCall ? 404 : 400;
        std::string code = e.kind() == AggregationError::Kind::UnknownRollCall ? "UnknownRollCall" : "InvalidQuery";
        resp = {status, error_body(code, e.what()), {}};
    } catch (const bias::AnalysisError& e) {
        resp = {400, error_body("InvalidAnalysisRequest", e.what()), {}};
    } catch (const store::StoreError& e) {
        resp = {500, error_body("StorageFailure", e.what()), {}};
    } catch (const std::exception& e) {
        resp = {500, error_body("InternalError", e.what()), {}};
    }
    if (!ui_origin_.empty()) {
        resp.headers["Access-Control-Allow-Origin"] = ui_origin_;
        resp.headers["Access-Control-Allow-Methods"] = "GET, POST, OPTIONS";
        resp.headers["Access-Control-Allow-Headers"] = "Content-Type";
        resp.headers["Vary"] = "Origin";
    }
    return resp;
}

ApiResponse ApiService::route(const ApiRequest& r) const {
    auto parts = text::split(r.path, '/');
    // "/v1/votes" splits to {"", "v1", "votes"}; a trailing slash adds an empty segment.
    if (!parts.empty() && parts.front().empty()) parts.erase(parts.begin());
    if (!parts.empty() && parts.back().empty()) parts.pop_back();
    if (parts.empty() || parts[0] != "v1") throw HttpFailure{404, "NotFound", "no route for " + r.path};
    parts.erase(parts.begin());

    if (r.method == "OPTIONS") return {204, nullptr, {}};

    auto want = [&](const char* method) {
        if (r.method != method) throw HttpFailure{405, "MethodNotAllowed", r.method + " is not allowed on " + r.path};
    };
    auto n = parts.size();
    if (n >= 1 && parts[0] == "votes") {
        if (n == 1) return want("GET"), list_votes(r);
        if (n == 2) return want("GET"), get_vote(parts[1]);
        if (n == 3 && parts[2] == "breakdown") return want("GET"), get_breakdown(parts[1], r);
    }
    if (n == 1 && parts[0] == "models") return want("GET"), list_models();
    if (n >= 1 && parts[0] == "predict") {
        if (n == 1) return want("POST"), predict(r);
        if (n == 2 && parts[1] == "counterfactual") return want("POST"), counterfactual(r);
    }
    if (n == 2 && parts[0] == "analysis") {
        if (parts[1] == "accuracy") return want("GET"), analysis_accuracy(r);
        if (parts[1] == "stereotypes") return want("GET"), analysis_stereotypes(r);
        if (parts[1] == "topics") return want("GET"), analysis_topics(r);
        if (parts[1] == "failures") return want("GET"), analysis_failures(r);
    }
    throw HttpFailure{404, "NotFound", "no route for " + r.path};
}

ApiResponse ApiService::list_votes(const ApiRequest& r) const {
    VoteIndexQuery q;
    if (auto v = param(r, "q"); v && !v->empty()) q.text_query = *v;
    if (auto v = long_param(r, "year")) q.year = static_cast<int>(*v);
    if (auto v = param(r, "topic"); v && !v->empty()) q.topic = *v;
    if (auto v = param(r, "sort"); v && !v->empty()) {
        auto s = parse_vote_sort(*v);
        if (!s) bad_request("InvalidQuery", "unknown sort " + *v);
        q.sort = *s;
    }
    if (auto v = long_param(r, "page")) q.page = *v;
    if (auto v = long_param(r, "page_size")) q.page_size = *v;
    auto page = search_votes(*corpus_, q);
    json items = json::array();
    for (const auto& s : page.items) items.push_back(summary_json(s));
    json next = nullptr;
    if (static_cast<size_t>(page.page + 1) * static_cast<size_t>(page.page_size) < page.total) next = page.page + 1;
    return ok({{"items", items},
               {"total", page.total},
               {"page", page.page},
               {"page_size", page.page_size},
               {"next_page", next}});
}

ApiResponse ApiService::get_vote(const std::string& id) const {
    const RollCall* rc = corpus_->find_roll_call(id);
    if (!rc) throw HttpFailure{404, "UnknownRollCall", "unknown roll call " + id};
    const Debate* d = corpus_->find_debate(rc->debate_id);
    ChoiceCounts totals;
    for (const auto& v : rc->records) totals.add(v.choice);
    json speeches = json::array();
    for (const auto& [s, m] : speeches_for_debate(*corpus_, d->id)) {
        const PoliticalGroup* g = corpus_->find_group(m->group_id);
        const VoteRecord* v = rc->record_for(m->id);
        speeches.push_back({{"id", s->id},
                            {"mep_id", m->id},
                            {"speaker_name", m->full_name},
                            {"group_id", m->group_id},
                            {"group_name", g ? g->name : m->group_id},
                            {"country", m->country},
                            {"gender", to_string(m->gender)},
                            {"vote", v ? json(to_string(v->choice)) : json(nullptr)},
                            {"text", s->text}});
    }
    return ok({{"id", rc->id},
               {"debate_id", d->id},
               {"title", d->title},
               {"topic", d->topic},
               {"date", format_date(rc->date)},
               {"debate_date", format_date(d->date)},
               {"report_id", d->report_id},
               {"outcome", to_string(rc->outcome)},
               {"participant_count", rc->participant_count()},
               {"totals", counts_json(totals)},
               {"speeches", speeches}});
}

ApiResponse ApiService::get_breakdown(const std::string& id, const ApiRequest& r) const {
    PivotKey pivot = PivotKey::PoliticalGroup;
    if (auto v = param(r, "pivot"); v && !v->empty()) {
        auto p = parse_pivot(*v);
        if (!p) bad_request("InvalidPivot", "pivot must be political_group, country, gender or age");
        pivot = *p;
    }
    if (!corpus_->find_roll_call(id)) throw HttpFailure{404, "UnknownRollCall", "unknown roll call " + id};
    auto b = vote_breakdown(*corpus_, id, pivot);
    json rows = json::array();
    for (const auto& row : b.rows) {
        std::string display = row.label;
        if (pivot == PivotKey::PoliticalGroup)
            if (const auto* g = corpus_->find_group(row.label)) display = g->name;
        auto j = counts_json(row.counts);
        j["label"] = row.label;
        j["display"] = display;
        rows.push_back(j);
    }
    return ok({{"roll_call_id", b.roll_call_id}, {"pivot", to_string(b.pivot)}, {"rows", rows},
               {"totals", counts_json(b.totals)}});
}

ApiResponse ApiService::list_models() const {
    json providers = json::array();
    for (const auto& id : gateway_->registry().provider_ids()) {
        const auto* e = gateway_->registry().find(id);
        providers.push_back({{"id", id}, {"kind", e->kind}, {"models", e->models}});
    }
    return ok({{"providers", providers}});
}

ApiResponse ApiService::predict(const ApiRequest& r) const {
    auto body = parse_body(r);
    auto task = parse_task_field(body);
    auto speech_id = required_string(body, "speech_id");
    const Speech* speech = corpus_->find_speech(speech_id);
    if (!speech) throw HttpFailure{404, "UnknownSpeech", "unknown speech " + speech_id};
    auto config = parse_config(body.value("context_config", json(nullptr)));
    config.validate(task);
    auto params = parse_params(body);
    auto models = parse_models(body, gateway_->registry());
    auto truth = ground_truth_for(*corpus_, *speech, task, body);

    llm::ResolvedContext resolved;
    auto prompt = llm::prepare_prompt(*corpus_, speech_id, task, config, &resolved);
    auto outcomes = gateway_->compare_models(models, prompt, params, llm::Gateway::Clock::now() + deadline_);

    json results = json::array();
    for (const auto& o : outcomes) {
        auto j = outcome_json(o);
        if (o.ok()) {
            store::PredictionRecord draft;
            draft.task = task;
            draft.speech_id = speech_id;
            draft.roll_call_id = truth.roll_call_id;
            draft.model = o.model;
            draft.context_fingerprint = prompt.context_fingerprint;
            draft.context = resolved;
            draft.parsed = std::get<llm::ParsedPrediction>(o.result);
            j["record_id"] = store_->record(draft, *corpus_);
            j["correct"] = draft.parsed.label == truth.label;
        }
        results.push_back(std::move(j));
    }
    return ok({{"task", to_string(task)},
               {"speech_id", speech_id},
               {"roll_call_id", truth.roll_call_id ? json(*truth.roll_call_id) : json(nullptr)},
               {"ground_truth", to_string(truth.label)},
               {"template_version", prompt.template_version},
               {"prompt_fingerprint", prompt.context_fingerprint},
               {"context", context_json(resolved)},
               {"results", results}});
}

ApiResponse ApiService::counterfactual(const ApiRequest& r) const {
    auto body = parse_body(r);
    auto task = parse_task_field(body);
    auto speech_id = required_string(body, "speech_id");
    const Speech* speech = corpus_->find_speech(speech_id);
    if (!speech) throw HttpFailure{404, "UnknownSpeech", "unknown speech " + speech_id};
    auto base = parse_config(body.value("base_config", json(nullptr)));
    if (!body.contains("overrides")) bad_request("IllegalOverride", "a counterfactual run needs at least one override");
    auto overrides = parse_overrides(body.at("overrides"));
    if (overrides.empty()) bad_request("IllegalOverride", "a counterfactual run needs at least one override");
    auto cf = base;
    for (auto& [a, v] : overrides) cf.overrides[a] = v;
    base.validate(task);
    cf.validate(task);
    auto params = parse_params(body);
    auto models = parse_models(body, gateway_->registry());
    auto truth = ground_truth_for(*corpus_, *speech, task, body);

    auto deadline = llm::Gateway::Clock::now() + deadline_;
    llm::ResolvedContext base_ctx, cf_ctx;
    auto base_prompt = llm::prepare_prompt(*corpus_, speech_id, task, base, &base_ctx);
    auto cf_prompt = llm::prepare_prompt(*corpus_, speech_id, task, cf, &cf_ctx);
    auto base_out = gateway_->compare_models(models, base_prompt, params, deadline);
    auto cf_out = gateway_->compare_models(models, cf_prompt, params, deadline);

    auto run_json = [&](const llm::Prompt& p, const llm::ResolvedContext& ctx, const std::vector<llm::ModelOutcome>& outs) {
        json results = json::array();
        for (const auto& o : outs) {
            auto j = outcome_json(o);
            if (o.ok()) j["correct"] = std::get<llm::ParsedPrediction>(o.result).label == truth.label;
            results.push_back(std::move(j));
        }
        return json{{"prompt_fingerprint", p.context_fingerprint}, {"context", context_json(ctx)}, {"results", results}};
    };
    json diff = json::array();
    for (const auto& d : llm::diff_contexts(base_ctx, cf_ctx))
        diff.push_back({{"attribute", to_string(d.attribute)},
                        {"before", d.before ? json(*d.before) : json(nullptr)},
                        {"after", d.after ? json(*d.after) : json(nullptr)}});
    json changed = json::array();
    for (size_t i = 0; i < base_out.size(); ++i) {
        if (!base_out[i].ok() || !cf_out[i].ok()) continue;
        auto a = std::get<llm::ParsedPrediction>(base_out[i].result).label;
        auto b = std::get<llm::ParsedPrediction>(cf_out[i].result).label;
        if (a != b)
            changed.push_back({{"model", base_out[i].model.id()}, {"base", to_string(a)}, {"counterfactual", to_string(b)}});
    }
    return ok({{"task", to_string(task)},
               {"speech_id", speech_id},
               {"roll_call_id", truth.roll_call_id ? json(*truth.roll_call_id) : json(nullptr)},
               {"ground_truth", to_string(truth.label)},
               {"template_version", base_prompt.template_version},
               {"base", run_json(base_prompt, base_ctx, base_out)},
               {"counterfactual", run_json(cf_prompt, cf_ctx, cf_out)},
               {"diff", diff},
               {"label_changes", changed}});
}

ApiResponse ApiService::analysis_accuracy(const ApiRequest& r) const {
    store::RecordFilter f;
    f.task = task_param(r);
    if (auto m = param(r, "model"); m && !m->empty()) f.model = *m;
    if (auto c = long_param(r, "confidence_min")) {
        if (*c < 1 || *c > 5) bad_request("InvalidQuery", "confidence_min must be in 1..5");
        f.min_confidence = static_cast<int>(*c);
    }
    auto g = param(r, "group_by").value_or("gender");
    auto group_by = store::parse_group_by(g);
    if (!group_by) bad_request("InvalidGrouping", "group_by must be gender, political_group, country, age or model");
    auto table = store_->accuracy_breakdown(f, *group_by);
    json rows = json::array();
    for (const auto& row : table.rows)
        rows.push_back({{"group", row.group}, {"n", row.n}, {"n_correct", row.n_correct}, {"accuracy", row.accuracy}});
    return ok({{"group_by", to_string(table.group_by)}, {"rows", rows}, {"total", table.total()}});
}

ApiResponse ApiService::analysis_stereotypes(const ApiRequest& r) const {
    int threshold = threshold_param(r);
    // Stylistic cues are mined from gender-task traces unless the caller pools tasks.
    std::optional<llm::TaskKind> task = llm::TaskKind::GenderPrediction;
    if (param(r, "task")) task = task_param(r);
    auto model = param(r, "model");
    if (model && model->empty()) model.reset();
    auto counting = counting_param(r);
    auto errors = bias::high_confidence_errors(*store_, task, threshold, model);
    auto rows = bias::count_stereotype_terms(errors, analysis_->stereotypes, counting);
    return ok({{"threshold", threshold},
               {"scope", task ? std::string(to_string(*task)) : std::string("all")},
               {"counting", counting == bias::CountingMode::CaseLevel ? "case" : "mention"},
               {"n_errors", errors.size()},
               {"rows", bias::to_json(rows)}});
}

ApiResponse ApiService::analysis_topics(const ApiRequest& r) const {
    int threshold = threshold_param(r);
    auto model = param(r, "model");
    if (model && model->empty()) model.reset();
    auto counting = counting_param(r);
    auto errors = bias::high_confidence_errors(*store_, llm::TaskKind::GenderPrediction, threshold, model);
    auto rows = bias::topic_gender_association(errors, analysis_->topics, counting);
    return ok({{"threshold", threshold},
               {"scope", "gender"},
               {"counting", counting == bias::CountingMode::CaseLevel ? "case" : "mention"},
               {"n_errors", errors.size()},
               {"rows", bias::to_json(rows)}});
}

ApiResponse ApiService::analysis_failures(const ApiRequest& r) const {
    int threshold = threshold_param(r);
    std::vector<std::string> models;
    if (auto m = param(r, "models"); m && !m->empty())
        for (auto& id : text::split(*m, ','))
            if (auto t = text::trim(id); !t.empty()) models.push_back(t);
    auto errors = bias::high_confidence_errors(*store_, llm::TaskKind::VotePrediction, threshold);
    auto dist = bias::failure_distribution(errors, analysis_->failure_rules, models);
    auto body = bias::to_json(dist);
    body["threshold"] = threshold;
    body["scope"] = "vote";
    return ok(body);
}

}  // namespace parlvote::api
