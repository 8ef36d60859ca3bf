// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "mforge/backends.hpp"
#include "mforge/retry.hpp"

// OpenAI-compatible HTTP clients:
//   chat        POST {base}/v1/chat/completions
//   embeddings  POST {base}/v1/embeddings   (+ "modality", "granularity")
//   images      POST {base}/v1/images/generations  (b64 PNG + echoed params)
namespace mforge {

/// JSON-over-HTTP transport shared by the three clients: bearer auth,
/// retries with backoff, per-backend admission gate.
class HttpJsonClient {
public:
    explicit HttpJsonClient(BackendConfig config, Sleeper sleeper = {});

    nlohmann::json post(const std::string& endpoint, const nlohmann::json& body, RetryStats* stats = nullptr);
    /// GET {base}/v1/models with a short timeout; true on any non-5xx reply.
    bool reachable();

    const BackendConfig& config() const noexcept { return config_; }
    AdmissionGate& gate() noexcept { return gate_; }
    /// Retries spent by the most recent post() on this client.
    int last_retries() const noexcept { return last_retries_.load(); }

private:
    HttpOutcome attempt(const std::string& path, const std::string& payload, double timeout_s);

    BackendConfig config_;
    std::string host_;    // scheme://host[:port]
    std::string prefix_;  // path prefix below host, without trailing "/v1"
    RetryPolicy retry_;
    AdmissionGate gate_;
    std::atomic<int> last_retries_{0};
};

class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(BackendConfig config, Sleeper sleeper = {});
    std::string complete(std::string_view system, std::span<const ChatMessage> messages) override;
    bool probe() override { return client_.reachable(); }
    HttpJsonClient& client() noexcept { return client_; }

    static nlohmann::json build_request(const BackendConfig& config, std::string_view system,
                                        std::span<const ChatMessage> messages);

private:
    HttpJsonClient client_;
};

class HttpImageBackend : public ImageBackend {
public:
    explicit HttpImageBackend(BackendConfig config, Sleeper sleeper = {});
    ImageArtifact generate(const VisualPrompt& prompt, const GenerationParams& params) override;
    bool probe() override { return client_.reachable(); }

    static nlohmann::json build_request(const BackendConfig& config, const VisualPrompt& prompt,
                                        const GenerationParams& params);

private:
    HttpJsonClient client_;
};

class HttpEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(BackendConfig config, Sleeper sleeper = {});
    EmbeddingVector embed(const EmbedContent& content, Granularity granularity) override;
    bool supports_per_token() const override { return client_.config().per_token_embeddings; }
    bool probe() override { return client_.reachable(); }

private:
    HttpJsonClient client_;
};

} // namespace mforge
