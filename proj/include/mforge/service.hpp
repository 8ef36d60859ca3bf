// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "mforge/evaluation.hpp"

namespace mforge {

struct ServiceOptions {
    std::size_t max_batch = 64;
    /// Items of one request scored concurrently.
    int parallelism = 8;
    /// Required as "Authorization: Bearer <token>" when set.
    std::optional<std::string> bearer_token;
    double health_ttl_s = 5.0;
    double request_timeout_s = 300.0;
    GenerationParams default_params = GenerationParams::turbo();
    /// Base weights; the service always scores with the GRPO extras on.
    WeightConfig weights{};
    std::function<std::chrono::steady_clock::time_point()> clock = [] { return std::chrono::steady_clock::now(); };
};

struct HttpReply {
    int status = 200;
    json body;
};

/// Parsed view of one completion's five tags. `ok` needs non-empty
/// source, target, intended_meaning and visual_prompt.
struct ParsedCompletion {
    bool ok = false;
    std::optional<Decomposition> decomposition;
    std::optional<VisualPrompt> prompt;
    /// visual_prompt content when present, else the raw completion.
    std::string length_basis;
};

ParsedCompletion parse_completion(std::string_view raw, const TokenCounter& counter = default_token_counter());

/// Transport-free request handlers behind /v1/score and /v1/health.
class RewardService {
public:
    RewardService(BackendSet backends, std::shared_ptr<RewardCalculator> calculator, ServiceOptions options = {});

    HttpReply handle_score(std::string_view body, std::optional<std::string_view> authorization = std::nullopt);
    HttpReply handle_health();

    /// Number of times backends were actually probed (cache misses).
    std::size_t probe_rounds() const noexcept { return probe_rounds_; }
    const ServiceOptions& options() const noexcept { return options_; }

private:
    json score_item(const json& item, const WeightConfig& weights, bool& backend_failure);

    BackendSet backends_;
    std::shared_ptr<RewardCalculator> calculator_;
    ServiceOptions options_;
    std::mutex health_mu_;
    std::optional<std::chrono::steady_clock::time_point> health_at_;
    json health_cache_;
    std::atomic<std::size_t> probe_rounds_{0};
};

/// httplib front end for a RewardService.
class ServiceServer {
public:
    explicit ServiceServer(RewardService& service);
    ~ServiceServer();

    /// Binds `host:port` (port 0 picks a free one) and returns the port.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// "host:port" -> (host, port). Throws Error{Config}.
std::pair<std::string, int> parse_listen_address(std::string_view spec);

} // namespace mforge
