#include "parlvote/llm/gateway.hpp"

#include "parlvote/llm/http_provider.hpp"
#include "parlvote/llm/stub_provider.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <thread>

namespace parlvote::llm {

using nlohmann::json;

void ProviderRegistry::add(ProviderEntry entry) {
    if (entry.id.empty()) throw GatewayError(GatewayError::Kind::UnknownProvider, "provider id is empty");
    if (!entry.limiter) entry.limiter = std::make_shared<InFlightLimiter>(4);
    auto id = entry.id;
    entries_[id] = std::move(entry);
}

void ProviderRegistry::add_provider(std::string id, std::shared_ptr<ModelProvider> provider, int max_in_flight) {
    ProviderEntry e;
    e.id = std::move(id);
    e.kind = "custom";
    e.endpoint = "stub";
    e.provider = std::move(provider);
    e.limiter = std::make_shared<InFlightLimiter>(max_in_flight);
    add(std::move(e));
}

const ProviderEntry* ProviderRegistry::find(std::string_view provider_id) const {
    auto it = entries_.find(provider_id);
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> ProviderRegistry::provider_ids() const {
    std::vector<std::string> ids;
    for (const auto& [id, e] : entries_) ids.push_back(id);
    return ids;
}

ModelSpec ProviderRegistry::resolve(std::string_view model_id) const {
    auto slash = model_id.find('/');
    if (slash == std::string_view::npos || slash == 0 || slash + 1 == model_id.size())
        throw GatewayError(GatewayError::Kind::UnknownProvider,
                           "model id must look like provider/model: " + std::string(model_id));
    auto provider_id = model_id.substr(0, slash);
    auto model_name = std::string(model_id.substr(slash + 1));
    const ProviderEntry* e = find(provider_id);
    if (!e) throw GatewayError(GatewayError::Kind::UnknownProvider, "unregistered provider: " + std::string(provider_id));
    if (!e->models.empty() && std::find(e->models.begin(), e->models.end(), model_name) == e->models.end())
        throw GatewayError(GatewayError::Kind::UnknownProvider, "provider " + e->id + " has no model " + model_name);
    return ModelSpec{e->id, model_name, e->endpoint};
}

ProviderRegistry ProviderRegistry::from_json(const json& doc, const std::filesystem::path& base_dir) {
    ProviderRegistry reg;
    auto providers = doc.find("providers");
    if (providers == doc.end() || !providers->is_array())
        throw GatewayError(GatewayError::Kind::UnknownProvider, "registry has no 'providers' array");
    for (const auto& p : *providers) {
        ProviderEntry e;
        e.id = p.value("id", "");
        e.kind = p.value("kind", "stub");
        e.auth_env = p.value("auth_env", "");
        if (auto m = p.find("models"); m != p.end() && m->is_array())
            for (const auto& name : *m) e.models.push_back(name.get<std::string>());
        e.limiter = std::make_shared<InFlightLimiter>(p.value("max_in_flight", 4));
        if (e.kind == "stub") {
            e.endpoint = "stub";
            json script = json::object();
            if (auto s = p.find("script"); s != p.end()) {
                if (s->is_object()) {
                    script = *s;
                } else if (s->is_string()) {
                    std::filesystem::path sp = s->get<std::string>();
                    if (sp.is_relative()) sp = base_dir / sp;
                    std::ifstream in(sp);
                    if (!in) throw GatewayError(GatewayError::Kind::UnknownProvider, "cannot read stub script " + sp.string());
                    script = json::parse(in);
                }
            }
            e.provider = std::make_shared<StubProvider>(std::move(script));
        } else if (e.kind == "chat_completions") {
            e.endpoint = p.value("endpoint", "");
            if (e.endpoint.empty())
                throw GatewayError(GatewayError::Kind::UnknownProvider, "provider " + e.id + " has no endpoint");
            e.provider = std::make_shared<ChatCompletionsProvider>(e.endpoint, e.auth_env);
        } else {
            throw GatewayError(GatewayError::Kind::UnknownProvider, "unknown provider kind: " + e.kind);
        }
        reg.add(std::move(e));
    }
    return reg;
}

ProviderRegistry ProviderRegistry::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw GatewayError(GatewayError::Kind::UnknownProvider, "cannot read provider registry " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded())
        throw GatewayError(GatewayError::Kind::UnknownProvider, "provider registry is not valid JSON: " + path.string());
    return from_json(doc, path.parent_path());
}

ProviderRegistry ProviderRegistry::default_stub() {
    return from_json(json{{"providers", json::array({{{"id", "stub"}, {"kind", "stub"}}})}});
}

Gateway::Gateway(std::shared_ptr<const ProviderRegistry> registry, RetryPolicy policy, Sleeper sleeper)
    : registry_(std::move(registry)), policy_(policy), sleeper_(std::move(sleeper)) {
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

RawResponse Gateway::predict(const ModelSpec& model, const Prompt& prompt, const GenerationParams& params,
                             std::optional<Clock::time_point> deadline) const {
    params.validate();
    const ProviderEntry* entry = registry_->find(model.provider_id);
    if (!entry || !entry->provider)
        throw GatewayError(GatewayError::Kind::UnknownProvider, "unregistered provider: " + model.provider_id);

    auto backoff = policy_.base_backoff;
    for (int attempt = 1;; ++attempt) {
        auto timeout = policy_.attempt_timeout;
        if (deadline) {
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - Clock::now());
            if (left.count() <= 0)
                throw GatewayError(GatewayError::Kind::ProviderTimeout, model.id() + ": request deadline exceeded");
            timeout = std::min(timeout, left);
        }
        try {
            InFlightSlot slot(*entry->limiter);
            RawResponse raw = entry->provider->complete(model, prompt, params, timeout);
            raw.attempts = attempt;
            return raw;
        } catch (const GatewayError& e) {
            bool transient = e.kind() == GatewayError::Kind::ProviderTimeout ||
                             e.kind() == GatewayError::Kind::TransportFailure;
            if (!transient || attempt > policy_.max_retries) throw;
            if (deadline && Clock::now() + backoff >= *deadline) throw;
        }
        sleeper_(backoff);
        backoff *= 2;
    }
}

ModelOutcome Gateway::predict_and_parse(const ModelSpec& model, const Prompt& prompt, const GenerationParams& params,
                                        std::optional<Clock::time_point> deadline) const {
    ModelOutcome out{model, ModelFailure{GatewayError::Kind::TransportFailure, ""}, std::nullopt};
    try {
        out.raw = predict(model, prompt, params, deadline);
    } catch (const GatewayError& e) {
        out.result = ModelFailure{e.kind(), e.what()};
        return out;
    }
    auto parsed = try_parse_prediction(out.raw->text, prompt.task);
    if (auto* f = std::get_if<ParseFailure>(&parsed)) out.result = ModelFailure{f->kind, f->message};
    else out.result = std::get<ParsedPrediction>(std::move(parsed));
    return out;
}

std::vector<ModelOutcome> Gateway::compare_models(std::span<const ModelSpec> models, const Prompt& prompt,
                                                  const GenerationParams& params,
                                                  std::optional<Clock::time_point> deadline) const {
    std::vector<std::future<ModelOutcome>> pending;
    pending.reserve(models.size());
    for (const auto& m : models)
        pending.push_back(std::async(std::launch::async, [this, &m, &prompt, &params, deadline] {
            return predict_and_parse(m, prompt, params, deadline);
        }));
    std::vector<ModelOutcome> out;
    out.reserve(models.size());
    for (auto& f : pending) out.push_back(f.get());
    return out;
}

Prompt prepare_prompt(const Corpus& corpus, std::string_view speech_id, TaskKind task, const ContextConfig& config,
                      ResolvedContext* resolved_out) {
    auto resolved = resolve_context(corpus, speech_id, task, config);
    const Speech* speech = corpus.find_speech(speech_id);
    const Debate* debate = corpus.find_debate(speech->debate_id);
    auto prompt = build_prompt(task, *debate, *speech, resolved);
    if (resolved_out) *resolved_out = std::move(resolved);
    return prompt;
}

}  // namespace parlvote::llm
