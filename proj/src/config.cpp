// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "toml.hpp"

#include "mforge/errors.hpp"
#include "mforge/http_backends.hpp"
#include "mforge/mock_backends.hpp"

namespace mforge {

namespace {

constexpr BackendRole kRoles[] = {BackendRole::Llm, BackendRole::Image, BackendRole::Vlm, BackendRole::Embed};

template <typename T>
T get_as(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Config, std::string("bad value for '") + key + "': " + e.what(), key);
    }
}

BackendConfig backend_from_json(const json& j, BackendConfig b) {
    if (!j.is_object()) throw Error(ErrorCode::Config, "backend entry must be a table");
    if (j.contains("base_url")) b.base_url = get_as<std::string>(j, "base_url");
    if (j.contains("api_key")) b.api_key = get_as<std::string>(j, "api_key");
    if (j.contains("model")) b.model_name = get_as<std::string>(j, "model");
    if (j.contains("timeout_s")) b.timeout_s = get_as<double>(j, "timeout_s");
    if (j.contains("max_retries")) b.max_retries = get_as<int>(j, "max_retries");
    if (j.contains("retry_backoff_s")) b.retry_backoff_s = get_as<double>(j, "retry_backoff_s");
    if (j.contains("max_concurrency")) b.max_concurrency = get_as<int>(j, "max_concurrency");
    if (j.contains("temperature")) b.temperature = get_as<double>(j, "temperature");
    if (j.contains("per_token_embeddings")) b.per_token_embeddings = get_as<bool>(j, "per_token_embeddings");
    return b;
}

template <typename T>
T parse_number(const std::string& text, const std::string& name) {
    T v{};
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size())
        throw Error(ErrorCode::Config, name + " is not a valid number: '" + text + "'", name);
    return v;
}

std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

} // namespace

GenerationParams RunConfig::active_params() const {
    auto it = generation_profiles.find(profile);
    if (it == generation_profiles.end()) throw Error(ErrorCode::Config, "unknown generation profile '" + profile + "'", profile);
    return seed ? it->second.with_seed(seed) : it->second;
}

void RunConfig::validate() const {
    if (n_iterations < 1) throw Error(ErrorCode::Config, "iterations must be >= 1");
    if (parallelism < 1) throw Error(ErrorCode::Config, "parallelism must be >= 1");
    if (service_parallelism < 1) throw Error(ErrorCode::Config, "service parallelism must be >= 1");
    if (max_batch < 1) throw Error(ErrorCode::Config, "max_batch must be >= 1");
    if (!(clip_scale > 0.0)) throw Error(ErrorCode::Config, "clip_scale must be positive");
    (void)active_params();
    weights.validate();
    for (const auto& [role, b] : backends) {
        try {
            b.validate();
        } catch (const Error& e) {
            throw Error(ErrorCode::Config, std::string(to_string(role)) + ": " + e.what());
        }
    }
}

EnvGetter process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (!v) return std::nullopt;
        return std::string(v);
    };
}

json read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Config, "cannot read config file " + path.string(), path.string());
    if (path.extension() == ".json") {
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw Error(ErrorCode::Config, "config file is not a JSON object: " + path.string(), path.string());
        return j;
    }
    try {
        toml::table tbl = toml::parse(in, path.string());
        std::ostringstream ss;
        ss << toml::json_formatter{tbl};
        return json::parse(ss.str());
    } catch (const toml::parse_error& e) {
        throw Error(ErrorCode::Config, std::string("TOML error in ") + path.string() + ": " + std::string(e.description()),
                    path.string());
    }
}

RunConfig apply_config_json(const json& doc, RunConfig cfg) {
    if (!doc.is_object()) throw Error(ErrorCode::Config, "config root must be a table");
    if (doc.contains("iterations")) cfg.n_iterations = get_as<int>(doc, "iterations");
    if (doc.contains("parallelism")) cfg.parallelism = get_as<int>(doc, "parallelism");
    if (doc.contains("out_dir")) cfg.out_dir = get_as<std::string>(doc, "out_dir");
    if (doc.contains("profile")) cfg.profile = get_as<std::string>(doc, "profile");
    if (doc.contains("dataset")) cfg.dataset_path = get_as<std::string>(doc, "dataset");
    if (doc.contains("seed")) cfg.seed = get_as<std::uint64_t>(doc, "seed");
    if (doc.contains("mock")) cfg.mock = get_as<bool>(doc, "mock");
    if (doc.contains("clip_scale")) cfg.clip_scale = get_as<double>(doc, "clip_scale");
    if (doc.contains("weights")) {
        try {
            cfg.weights = weights_from_json(doc["weights"], cfg.weights);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Config, std::string("bad weights: ") + e.what());
        }
    }
    if (doc.contains("profiles")) {
        const json& profiles = doc["profiles"];
        if (!profiles.is_object()) throw Error(ErrorCode::Config, "profiles must be a table");
        for (const auto& [name, p] : profiles.items()) {
            json merged = cfg.generation_profiles.count(name) ? to_json(cfg.generation_profiles.at(name))
                                                              : to_json(GenerationParams::turbo());
            merged.merge_patch(p);
            try {
                cfg.generation_profiles.insert_or_assign(name, generation_params_from_json(merged));
            } catch (const Error& e) {
                throw Error(ErrorCode::Config, "profile '" + name + "': " + e.what(), name);
            }
        }
    }
    if (doc.contains("backends")) {
        const json& backends = doc["backends"];
        if (!backends.is_object()) throw Error(ErrorCode::Config, "backends must be a table");
        for (const auto& [name, b] : backends.items()) {
            BackendRole role;
            try {
                role = backend_role_from_string(name);
            } catch (const Error&) {
                throw Error(ErrorCode::Config, "unknown backend role '" + name + "'", name);
            }
            cfg.backends[role] = backend_from_json(b, cfg.backends[role]);
        }
    }
    if (doc.contains("service")) {
        const json& s = doc["service"];
        if (s.contains("listen")) cfg.listen = get_as<std::string>(s, "listen");
        if (s.contains("max_batch")) cfg.max_batch = get_as<std::size_t>(s, "max_batch");
        if (s.contains("parallelism")) cfg.service_parallelism = get_as<int>(s, "parallelism");
        if (s.contains("cache_dir")) cfg.cache_dir = get_as<std::string>(s, "cache_dir");
    }
    if (doc.contains("report")) {
        const json& r = doc["report"];
        if (r.contains("short_max_words")) cfg.short_max_words = get_as<std::size_t>(r, "short_max_words");
    }
    return cfg;
}

RunConfig apply_env(RunConfig cfg, const EnvGetter& env) {
    for (BackendRole role : kRoles) {
        std::string prefix = "METAPHOR_FORGE_" + upper(to_string(role));
        if (auto url = env(prefix + "_URL")) cfg.backends[role].base_url = *url;
        if (auto key = env(prefix + "_KEY")) cfg.backends[role].api_key = *key;
    }
    if (auto v = env("METAPHOR_FORGE_ITERATIONS")) cfg.n_iterations = parse_number<int>(*v, "METAPHOR_FORGE_ITERATIONS");
    if (auto v = env("METAPHOR_FORGE_PARALLELISM"))
        cfg.parallelism = parse_number<int>(*v, "METAPHOR_FORGE_PARALLELISM");
    if (auto v = env("METAPHOR_FORGE_OUT")) cfg.out_dir = *v;
    if (auto v = env("METAPHOR_FORGE_PROFILE")) cfg.profile = *v;
    if (auto v = env("METAPHOR_FORGE_SEED")) cfg.seed = parse_number<std::uint64_t>(*v, "METAPHOR_FORGE_SEED");
    return cfg;
}

RunConfig apply_cli(RunConfig cfg, const CliOverrides& cli) {
    if (cli.dataset) cfg.dataset_path = *cli.dataset;
    if (cli.out_dir) cfg.out_dir = *cli.out_dir;
    if (cli.profile) cfg.profile = *cli.profile;
    if (cli.iterations) cfg.n_iterations = *cli.iterations;
    if (cli.parallelism) cfg.parallelism = *cli.parallelism;
    if (cli.seed) cfg.seed = *cli.seed;
    if (cli.listen) cfg.listen = *cli.listen;
    if (cli.mock) cfg.mock = true;
    return cfg;
}

RunConfig load_config(const CliOverrides& cli, const EnvGetter& env) {
    RunConfig cfg;
    if (cli.config_file) cfg = apply_config_json(read_config_file(*cli.config_file), cfg);
    cfg = apply_env(std::move(cfg), env);
    cfg = apply_cli(std::move(cfg), cli);
    cfg.validate();
    return cfg;
}

json to_json(const RunConfig& cfg) {
    json j;
    json backends = json::object();
    for (const auto& [role, b] : cfg.backends) {
        json e = {{"base_url", b.base_url},
                  {"model", b.model_name},
                  {"timeout_s", b.timeout_s},
                  {"max_retries", b.max_retries},
                  {"retry_backoff_s", b.retry_backoff_s},
                  {"max_concurrency", b.max_concurrency},
                  {"per_token_embeddings", b.per_token_embeddings}};
        e["api_key"] = b.api_key ? json("<redacted>") : json(nullptr);
        e["temperature"] = b.temperature ? json(*b.temperature) : json(nullptr);
        backends[std::string(to_string(role))] = std::move(e);
    }
    j["backends"] = std::move(backends);
    j["weights"] = to_json(cfg.weights);
    j["iterations"] = cfg.n_iterations;
    json profiles = json::object();
    for (const auto& [name, p] : cfg.generation_profiles) profiles[name] = to_json(p);
    j["profiles"] = std::move(profiles);
    j["profile"] = cfg.profile;
    j["parallelism"] = cfg.parallelism;
    j["seed"] = cfg.seed ? json(*cfg.seed) : json(nullptr);
    j["mock"] = cfg.mock;
    j["clip_scale"] = cfg.clip_scale;
    return j;
}

BackendSet make_backends(const RunConfig& cfg) {
    if (cfg.mock) {
        BackendSet set = make_mock_backends(cfg.seed.value_or(0));
        return set;
    }
    auto need = [&](BackendRole role) -> const BackendConfig& {
        auto it = cfg.backends.find(role);
        if (it == cfg.backends.end() || it->second.base_url.empty())
            throw Error(ErrorCode::Config,
                        "backend '" + std::string(to_string(role)) + "' has no base_url (set it in the config, via " +
                            "METAPHOR_FORGE_" + upper(to_string(role)) + "_URL, or pass --mock)");
        return it->second;
    };
    BackendSet set;
    set.llm = std::make_shared<HttpChatBackend>(need(BackendRole::Llm));
    set.image = std::make_shared<HttpImageBackend>(need(BackendRole::Image));
    set.vlm = std::make_shared<HttpChatBackend>(need(BackendRole::Vlm));
    set.embed = std::make_shared<HttpEmbeddingBackend>(need(BackendRole::Embed));
    return set;
}

} // namespace mforge
