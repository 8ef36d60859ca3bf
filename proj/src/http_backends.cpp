// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "httplib.h"

#include "mforge/http_backends.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "mforge/errors.hpp"
#include "mforge/hashing.hpp"
#include "mforge/png.hpp"

namespace mforge {

using nlohmann::json;

namespace {

std::string data_url(const ImageArtifact& image) { return "data:image/png;base64," + base64_encode(image.bytes()); }

void set_timeouts(httplib::Client& cli, double seconds) {
    auto sec = static_cast<time_t>(seconds);
    auto usec = static_cast<time_t>((seconds - static_cast<double>(sec)) * 1e6);
    cli.set_connection_timeout(sec, usec);
    cli.set_read_timeout(sec, usec);
    cli.set_write_timeout(sec, usec);
}

[[noreturn]] void decode_failure(const std::string& what) { throw Error(ErrorCode::PayloadDecode, what); }

} // namespace

HttpJsonClient::HttpJsonClient(BackendConfig config, Sleeper sleeper)
    : config_(std::move(config)),
      retry_(config_.max_retries, config_.retry_backoff_s, std::move(sleeper)),
      gate_(config_.max_concurrency) {
    config_.validate();
    std::string url = config_.base_url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    if (url.size() >= 3 && url.compare(url.size() - 3, 3, "/v1") == 0) url.resize(url.size() - 3);
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw Error(ErrorCode::Config, "base_url must include a scheme: " + config_.base_url);
    auto slash = url.find('/', scheme + 3);
    host_ = slash == std::string::npos ? url : url.substr(0, slash);
    prefix_ = slash == std::string::npos ? std::string{} : url.substr(slash);
}

HttpOutcome HttpJsonClient::attempt(const std::string& path, const std::string& payload, double timeout_s) {
    httplib::Client cli(host_);
    set_timeouts(cli, timeout_s);
    if (config_.api_key && !config_.api_key->empty()) cli.set_bearer_token_auth(*config_.api_key);
    auto res = payload.empty() ? cli.Get(prefix_ + path) : cli.Post(prefix_ + path, payload, "application/json");
    HttpOutcome out;
    if (!res) {
        auto err = res.error();
        out.timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
        out.transport_error = httplib::to_string(err);
        return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
}

json HttpJsonClient::post(const std::string& endpoint, const json& body, RetryStats* stats) {
    auto permit = gate_.acquire();
    const std::string payload = body.dump();
    RetryStats local;
    HttpOutcome outcome;
    try {
        outcome = retry_.run([&] { return attempt(endpoint, payload, config_.timeout_s); }, &local);
    } catch (...) {
        last_retries_ = local.retries;
        if (stats) *stats = local;
        throw;
    }
    last_retries_ = local.retries;
    if (stats) *stats = local;
    spdlog::debug("POST {}{} -> {} ({} retries)", host_, endpoint, outcome.status, local.retries);
    auto parsed = json::parse(outcome.body, nullptr, false);
    if (parsed.is_discarded()) decode_failure("backend reply is not JSON");
    return parsed;
}

bool HttpJsonClient::reachable() {
    auto out = attempt("/v1/models", {}, std::min(config_.timeout_s, 2.0));
    return out.status > 0 && out.status < 500;
}

// --- chat -----------------------------------------------------------------------

HttpChatBackend::HttpChatBackend(BackendConfig config, Sleeper sleeper) : client_(std::move(config), std::move(sleeper)) {}

json HttpChatBackend::build_request(const BackendConfig& config, std::string_view system,
                                    std::span<const ChatMessage> messages) {
    json msgs = json::array();
    if (!system.empty()) msgs.push_back({{"role", "system"}, {"content", std::string(system)}});
    for (const auto& m : messages) {
        if (m.images.empty()) {
            msgs.push_back({{"role", m.role}, {"content", m.text}});
            continue;
        }
        json parts = json::array();
        for (const auto& img : m.images) parts.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url(img)}}}});
        parts.push_back({{"type", "text"}, {"text", m.text}});
        msgs.push_back({{"role", m.role}, {"content", parts}});
    }
    json body = {{"model", config.model_name}, {"messages", msgs}};
    if (config.temperature) body["temperature"] = *config.temperature;
    return body;
}

std::string HttpChatBackend::complete(std::string_view system, std::span<const ChatMessage> messages) {
    if (messages.empty()) throw Error(ErrorCode::InvalidArgument, "chat request needs at least one message");
    const auto& cfg = client_.config();
    spdlog::debug("chat {} temperature={}", cfg.model_name,
                  cfg.temperature ? fmt::format("{}", *cfg.temperature) : std::string("server default"));
    json reply = client_.post("/v1/chat/completions", build_request(cfg, system, messages));
    try {
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        if (content.is_string()) return content.get<std::string>();
        if (content.is_array()) {
            std::string text;
            for (const auto& part : content)
                if (part.value("type", "") == "text") text += part.value("text", "");
            return text;
        }
    } catch (const json::exception&) {
    }
    decode_failure("chat reply lacks choices[0].message.content");
}

// --- images ---------------------------------------------------------------------

HttpImageBackend::HttpImageBackend(BackendConfig config, Sleeper sleeper)
    : client_(std::move(config), std::move(sleeper)) {}

json HttpImageBackend::build_request(const BackendConfig& config, const VisualPrompt& prompt,
                                     const GenerationParams& params) {
    json body = {{"model", config.model_name},
                 {"prompt", prompt.text()},
                 {"n", 1},
                 {"size", std::to_string(params.width()) + "x" + std::to_string(params.height())},
                 {"width", params.width()},
                 {"height", params.height()},
                 {"guidance_scale", params.guidance_scale()},
                 {"num_inference_steps", params.inference_steps()},
                 {"response_format", "b64_json"}};
    if (params.seed()) body["seed"] = *params.seed();
    return body;
}

ImageArtifact HttpImageBackend::generate(const VisualPrompt& prompt, const GenerationParams& params) {
    if (trim(prompt.text()).empty()) throw Error(ErrorCode::InvalidArgument, "prompt text is empty");
    json reply = client_.post("/v1/images/generations", build_request(client_.config(), prompt, params));
    std::string b64;
    try {
        b64 = reply.at("data").at(0).at("b64_json").get<std::string>();
    } catch (const json::exception&) {
        decode_failure("image reply lacks data[0].b64_json");
    }
    auto bytes = base64_decode(b64);
    if (!png::has_signature(bytes)) decode_failure("image reply is not a PNG");
    return ImageArtifact(std::move(bytes), params, prompt.text());
}

// --- embeddings -----------------------------------------------------------------

HttpEmbeddingBackend::HttpEmbeddingBackend(BackendConfig config, Sleeper sleeper)
    : client_(std::move(config), std::move(sleeper)) {}

EmbeddingVector HttpEmbeddingBackend::embed(const EmbedContent& content, Granularity granularity) {
    const bool per_token = granularity == Granularity::PerToken;
    if (per_token && !supports_per_token())
        throw Error(ErrorCode::InvalidArgument, "per-token embeddings are disabled for this backend");
    json body = {{"model", client_.config().model_name}, {"granularity", per_token ? "per_token" : "sequence"}};
    Modality modality = Modality::Text;
    if (const auto* text = std::get_if<std::string>(&content)) {
        if (trim(*text).empty()) throw Error(ErrorCode::InvalidArgument, "embedding payload is empty");
        body["input"] = *text;
        body["modality"] = "text";
    } else {
        modality = Modality::Image;
        body["input"] = data_url(std::get<ImageArtifact>(content));
        body["modality"] = "image";
    }
    json reply = client_.post("/v1/embeddings", body);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> tokens;
    try {
        auto data = reply.at("data");
        if (!data.is_array() || data.empty()) decode_failure("embedding reply has no data");
        std::vector<json> items(data.begin(), data.end());
        std::stable_sort(items.begin(), items.end(),
                         [](const json& a, const json& b) { return a.value("index", 0) < b.value("index", 0); });
        for (const auto& item : items) {
            rows.push_back(item.at("embedding").get<std::vector<double>>());
            if (per_token) tokens.push_back(item.at("token").get<std::string>());
        }
    } catch (const json::exception& e) {
        decode_failure(std::string("malformed embedding reply: ") + e.what());
    }
    if (!per_token && rows.size() > 1) rows.resize(1);
    return EmbeddingVector(modality, std::move(rows), std::move(tokens));
}

} // namespace mforge
