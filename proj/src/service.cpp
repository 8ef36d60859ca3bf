// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/service.hpp"

#include <atomic>
#include <charconv>
#include <thread>

#include "httplib.h"
#include <spdlog/spdlog.h>

#include "mforge/errors.hpp"
#include "mforge/hashing.hpp"
#include "mforge/prompts.hpp"
#include "mforge/tag_parser.hpp"

namespace mforge {

namespace {

HttpReply error_reply(int status, std::string message) { return HttpReply{status, json{{"error", std::move(message)}}}; }

std::string tag_content(std::string_view raw, std::string_view tag) {
    std::string content;
    if (probe_tag(raw, tag, &content) != TagStatus::Present) return {};
    return trim(content);
}

RewardBreakdown zero_breakdown(double format, double length, const WeightConfig& weights) {
    RewardComponents c;
    c.format = format;
    c.length = length;
    c.flags.insert("parse:failed");
    return composite_reward(c, weights);
}

} // namespace

ParsedCompletion parse_completion(std::string_view raw, const TokenCounter& counter) {
    ParsedCompletion out;
    std::string s = tag_content(raw, "source");
    std::string t = tag_content(raw, "target");
    std::string m = tag_content(raw, "intended_meaning");
    std::string p = tag_content(raw, "visual_prompt");
    out.length_basis = p.empty() ? std::string(raw) : p;
    if (s.empty() || t.empty() || m.empty() || p.empty()) return out;
    out.decomposition.emplace(s, t, m, tag_content(raw, "reasoning"));
    out.prompt.emplace(p, PromptOrigin::initial(), counter);
    out.ok = true;
    return out;
}

RewardService::RewardService(BackendSet backends, std::shared_ptr<RewardCalculator> calculator, ServiceOptions options)
    : backends_(std::move(backends)), calculator_(std::move(calculator)), options_(std::move(options)) {
    if (!calculator_) throw Error(ErrorCode::InvalidArgument, "service needs a reward calculator");
    if (options_.max_batch < 1 || options_.parallelism < 1)
        throw Error(ErrorCode::Config, "max_batch and parallelism must be positive");
    options_.weights.include_grpo_extras = true;
    options_.weights.validate();
}

json RewardService::score_item(const json& item, const WeightConfig& weights, bool& backend_failure) {
    const std::string& text = item.at("metaphor_text").get_ref<const std::string&>();
    const std::string& raw = item.at("completion_raw").get_ref<const std::string&>();
    GenerationParams params = options_.default_params;
    if (item.contains("generation_params") && !item["generation_params"].is_null()) {
        json merged = to_json(params);
        merged.merge_patch(item["generation_params"]);
        params = generation_params_from_json(merged);
    }

    Metaphor metaphor("", text);
    double fmt_reward = format_reward(raw, prompts::kDecompositionTags);
    ParsedCompletion parsed = parse_completion(raw);

    json out;
    out["parse_ok"] = parsed.ok;
    out["error"] = nullptr;
    if (!parsed.ok) {
        out["key"] = sha256_hex("unparsed\x1f" + metaphor.id() + "\x1f" + raw);
        out["breakdown"] = to_json(
            zero_breakdown(fmt_reward, length_reward(count_tokens(parsed.length_basis)), weights));
        return out;
    }
    CompletionKey key = make_completion_key(metaphor, *parsed.decomposition, *parsed.prompt, params);
    out["key"] = key.digest;
    try {
        out["breakdown"] = to_json(calculator_->score_completion(key, metaphor, *parsed.decomposition,
                                                                 *parsed.prompt, params, weights, fmt_reward));
    } catch (const Error& e) {
        out["breakdown"] = nullptr;
        out["error"] = e.what();
        if (e.is_backend_error()) backend_failure = true;
    }
    return out;
}

HttpReply RewardService::handle_score(std::string_view body, std::optional<std::string_view> authorization) {
    if (options_.bearer_token) {
        std::string expected = "Bearer " + *options_.bearer_token;
        if (!authorization || *authorization != expected) return error_reply(401, "missing or invalid bearer token");
    }
    json req = json::parse(body, nullptr, false);
    if (req.is_discarded() || !req.is_object()) return error_reply(400, "body is not a JSON object");
    if (!req.contains("items") || !req["items"].is_array() || req["items"].empty())
        return error_reply(400, "items must be a non-empty array");
    const json& items = req["items"];
    if (items.size() > options_.max_batch)
        return error_reply(413, "batch of " + std::to_string(items.size()) + " exceeds the limit of " +
                                    std::to_string(options_.max_batch));
    for (std::size_t i = 0; i < items.size(); ++i) {
        const json& it = items[i];
        if (!it.is_object() || !it.contains("metaphor_text") || !it["metaphor_text"].is_string() ||
            !it.contains("completion_raw") || !it["completion_raw"].is_string())
            return error_reply(400, "item " + std::to_string(i) + " needs string metaphor_text and completion_raw");
        if (trim(it["metaphor_text"].get<std::string>()).empty())
            return error_reply(400, "item " + std::to_string(i) + " has an empty metaphor_text");
        if (it.contains("generation_params") && !it["generation_params"].is_null() &&
            !it["generation_params"].is_object())
            return error_reply(400, "item " + std::to_string(i) + " has non-object generation_params");
    }
    std::optional<std::string> group_id;
    if (req.contains("group_id") && !req["group_id"].is_null()) {
        if (!req["group_id"].is_string()) return error_reply(400, "group_id must be a string");
        group_id = req["group_id"].get<std::string>();
    }
    WeightConfig weights = options_.weights;
    try {
        if (req.contains("weights_override") && !req["weights_override"].is_null()) {
            if (!req["weights_override"].is_object()) return error_reply(400, "weights_override must be an object");
            weights = weights_from_json(req["weights_override"], weights);
        }
        weights.include_grpo_extras = true;
        weights.validate();
    } catch (const std::exception& e) {
        return error_reply(400, e.what());
    }

    std::vector<json> results(items.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> backend_failure{false};
    std::atomic<bool> bad_request{false};
    std::string bad_detail;
    std::mutex bad_mu;
    auto worker = [&] {
        for (std::size_t i = next++; i < items.size(); i = next++) {
            bool failed = false;
            try {
                results[i] = score_item(items[i], weights, failed);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::EmptyMetaphor) {
                    std::lock_guard lock(bad_mu);
                    bad_request = true;
                    bad_detail = "item " + std::to_string(i) + ": " + e.what();
                } else {
                    results[i] = json{{"key", nullptr}, {"breakdown", nullptr}, {"parse_ok", false}, {"error", e.what()}};
                    failed = true;
                }
            } catch (const std::exception& e) {
                results[i] = json{{"key", nullptr}, {"breakdown", nullptr}, {"parse_ok", false}, {"error", e.what()}};
                failed = true;
            }
            if (failed) backend_failure = true;
        }
    };
    std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(options_.parallelism), items.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> threads;
        for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    }
    if (bad_request) return error_reply(400, bad_detail);

    json resp;
    resp["items"] = results;
    if (group_id) {
        resp["group_id"] = *group_id;
        bool complete = true;
        std::vector<double> totals;
        for (const auto& r : results) {
            if (r["breakdown"].is_null()) {
                complete = false;
                break;
            }
            totals.push_back(r["breakdown"]["total"].get<double>());
        }
        resp["advantages"] = complete ? json(group_advantages(totals)) : json(nullptr);
    }
    return HttpReply{backend_failure ? 502 : 200, std::move(resp)};
}

HttpReply RewardService::handle_health() {
    std::lock_guard lock(health_mu_);
    auto now = options_.clock();
    auto ttl = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(options_.health_ttl_s));
    if (!health_at_ || now - *health_at_ >= ttl) {
        ++probe_rounds_;
        json reach = json::object();
        bool all_up = true;
        for (const auto& [name, backend] : backends_.probes()) {
            bool up = false;
            if (backend) {
                try {
                    up = backend->probe();
                } catch (const std::exception& e) {
                    spdlog::debug("probe of {} threw: {}", name, e.what());
                }
            }
            reach[name] = up;
            all_up = all_up && up;
        }
        health_cache_ = json{{"status", all_up ? "ok" : "degraded"}, {"backend_reachability", reach}};
        health_at_ = now;
    }
    return HttpReply{200, health_cache_};
}

// --- HTTP front end ------------------------------------------------------------

struct ServiceServer::Impl {
    RewardService& service;
    httplib::Server server;
    explicit Impl(RewardService& s) : service(s) {}
};

ServiceServer::ServiceServer(RewardService& service) : impl_(std::make_unique<Impl>(service)) {
    auto& svr = impl_->server;
    auto timeout = static_cast<time_t>(service.options().request_timeout_s);
    svr.set_read_timeout(timeout, 0);
    svr.set_write_timeout(timeout, 0);
    svr.set_payload_max_length(64u << 20);
    auto send = [](httplib::Response& res, const HttpReply& reply) {
        res.status = reply.status;
        res.set_content(reply.body.dump(), "application/json");
    };
    svr.Post("/v1/score", [this, send](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::string_view> auth;
        std::string header;
        if (req.has_header("Authorization")) {
            header = req.get_header_value("Authorization");
            auth = header;
        }
        try {
            send(res, impl_->service.handle_score(req.body, auth));
        } catch (const std::exception& e) {
            spdlog::error("score request failed: {}", e.what());
            send(res, error_reply(500, e.what()));
        }
    });
    svr.Get("/v1/health", [this, send](const httplib::Request&, httplib::Response& res) {
        send(res, impl_->service.handle_health());
    });
}

ServiceServer::~ServiceServer() { stop(); }

int ServiceServer::bind(const std::string& host, int port) {
    int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void ServiceServer::run() { impl_->server.listen_after_bind(); }

void ServiceServer::stop() {
    if (impl_) impl_->server.stop();
}

std::pair<std::string, int> parse_listen_address(std::string_view spec) {
    auto colon = spec.rfind(':');
    if (colon == std::string_view::npos || colon == 0)
        throw Error(ErrorCode::Config, "listen address must look like host:port", std::string(spec));
    std::string_view port_text = spec.substr(colon + 1);
    int port = -1;
    auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc() || p != port_text.data() + port_text.size() || port < 0 || port > 65535)
        throw Error(ErrorCode::Config, "bad port in listen address", std::string(spec));
    return {std::string(spec.substr(0, colon)), port};
}

} // namespace mforge
