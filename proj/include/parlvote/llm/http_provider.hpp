#pragma once

#include "parlvote/llm/provider.hpp"

#include <string>

namespace parlvote::llm {

/// Adapter for OpenAI-compatible chat-completion servers (OpenAI, vLLM,
/// Ollama, llama.cpp server, ...). POSTs `<endpoint>/v1/chat/completions`
/// with a bearer token read from `auth_env` at call time.
class ChatCompletionsProvider : public ModelProvider {
public:
    ChatCompletionsProvider(std::string endpoint, std::string auth_env);

    RawResponse complete(const ModelSpec& model, const Prompt& prompt, const GenerationParams& params,
                         std::chrono::milliseconds timeout) override;

    const std::string& endpoint() const { return endpoint_; }

private:
    std::string endpoint_;
    std::string auth_env_;
};

}  // namespace parlvote::llm
