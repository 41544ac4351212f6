#include "parlvote/llm/http_provider.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>

namespace parlvote::llm {

using nlohmann::json;

ChatCompletionsProvider::ChatCompletionsProvider(std::string endpoint, std::string auth_env)
    : endpoint_(std::move(endpoint)), auth_env_(std::move(auth_env)) {
    while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
}

RawResponse ChatCompletionsProvider::complete(const ModelSpec& model, const Prompt& prompt,
                                              const GenerationParams& params, std::chrono::milliseconds timeout) {
    httplib::Client client(endpoint_);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    if (!auth_env_.empty()) {
        if (const char* key = std::getenv(auth_env_.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    json body = {
        {"model", model.model_name},
        {"messages",
         json::array({{{"role", "system"}, {"content", prompt.system_text}},
                      {{"role", "user"}, {"content", prompt.user_text}}})},
        {"temperature", params.temperature},
        {"max_tokens", params.max_output_tokens},
    };

    auto start = std::chrono::steady_clock::now();
    auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);

    if (!res) {
        auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout || elapsed >= timeout)
            throw GatewayError(GatewayError::Kind::ProviderTimeout, model.id() + " timed out");
        throw GatewayError(GatewayError::Kind::TransportFailure, model.id() + ": " + httplib::to_string(err));
    }
    if (res->status < 200 || res->status >= 300)
        throw GatewayError(GatewayError::Kind::ProviderRefusal,
                           model.id() + " returned HTTP " + std::to_string(res->status));

    auto doc = json::parse(res->body, nullptr, false);
    const json* content = nullptr;
    std::string finish_reason;
    if (doc.is_object()) {
        auto choices = doc.find("choices");
        if (choices != doc.end() && choices->is_array() && !choices->empty() && (*choices)[0].is_object()) {
            const auto& first = (*choices)[0];
            if (auto fr = first.find("finish_reason"); fr != first.end() && fr->is_string())
                finish_reason = fr->get<std::string>();
            if (auto msg = first.find("message"); msg != first.end() && msg->is_object()) {
                if (auto c = msg->find("content"); c != msg->end() && c->is_string()) content = &*c;
            }
        }
    }
    if (finish_reason == "content_filter")
        throw GatewayError(GatewayError::Kind::ProviderRefusal, model.id() + " output blocked by content filter");
    if (!content) throw GatewayError(GatewayError::Kind::TransportFailure, model.id() + " returned a malformed payload");

    RawResponse raw;
    raw.text = content->get<std::string>();
    raw.latency = elapsed;
    raw.provider_id = model.provider_id;
    raw.model_name = model.model_name;
    raw.metadata = {{"http_status", res->status}, {"finish_reason", finish_reason}};
    if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) raw.metadata["usage"] = *usage;
    return raw;
}

}  // namespace parlvote::llm
