#pragma once

#include "parlvote/llm/prompt.hpp"
#include "parlvote/llm/types.hpp"

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <string>

namespace parlvote::llm {

/// A model backend. Implementations throw GatewayError with kind
/// ProviderTimeout, ProviderRefusal or TransportFailure; the gateway decides
/// about retries.
class ModelProvider {
public:
    virtual ~ModelProvider() = default;
    virtual RawResponse complete(const ModelSpec& model, const Prompt& prompt, const GenerationParams& params,
                                 std::chrono::milliseconds timeout) = 0;
};

/// Counting semaphore with a runtime limit.
class InFlightLimiter {
public:
    explicit InFlightLimiter(int limit) : available_(limit < 1 ? 1 : limit) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
    }
    void release() {
        {
            std::lock_guard lock(mu_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int available_;
};

class InFlightSlot {
public:
    explicit InFlightSlot(InFlightLimiter& l) : limiter_(l) { limiter_.acquire(); }
    ~InFlightSlot() { limiter_.release(); }
    InFlightSlot(const InFlightSlot&) = delete;
    InFlightSlot& operator=(const InFlightSlot&) = delete;

private:
    InFlightLimiter& limiter_;
};

}  // namespace parlvote::llm
