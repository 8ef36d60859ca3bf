// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "mforge/backends.hpp"
#include "mforge/rewards.hpp"

namespace mforge {

struct RunConfig {
    std::map<BackendRole, BackendConfig> backends;
    WeightConfig weights{};
    int n_iterations = 10;
    std::map<std::string, GenerationParams> generation_profiles{{"turbo", GenerationParams::turbo()},
                                                                {"quality", GenerationParams::quality()}};
    std::string profile = "turbo";
    std::filesystem::path out_dir = "out";
    int parallelism = 2;
    std::optional<std::filesystem::path> dataset_path;
    std::optional<std::uint64_t> seed;
    bool mock = false;
    double clip_scale = 1.0;
    /// On-disk reward cache used by `serve`; none when unset.
    std::optional<std::filesystem::path> cache_dir;
    std::string listen = "127.0.0.1:8080";
    std::size_t max_batch = 64;
    int service_parallelism = 8;
    /// Report buckets: short <= this many words, long above.
    std::size_t short_max_words = 5;

    /// Selected profile with the seed applied. Throws Error{Config}.
    GenerationParams active_params() const;
    /// Throws Error{Config} on unknown profile, non-positive counts or bad weights.
    void validate() const;
};

/// Flag values; unset fields defer to env, file and defaults.
struct CliOverrides {
    std::optional<std::filesystem::path> config_file;
    std::optional<std::filesystem::path> dataset;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::string> profile;
    std::optional<int> iterations;
    std::optional<int> parallelism;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> listen;
    bool mock = false;
};

using EnvGetter = std::function<std::optional<std::string>(const std::string&)>;
EnvGetter process_env();

/// Applies a parsed config document (TOML or JSON shape) onto `base`.
RunConfig apply_config_json(const json& doc, RunConfig base = {});
/// TOML unless the extension is .json. Throws Error{Config}.
json read_config_file(const std::filesystem::path& path);
RunConfig apply_env(RunConfig cfg, const EnvGetter& env);
RunConfig apply_cli(RunConfig cfg, const CliOverrides& cli);

/// default < file < env < flags, then validate().
RunConfig load_config(const CliOverrides& cli, const EnvGetter& env = process_env());

/// Effective config for run records; API keys are redacted.
json to_json(const RunConfig& cfg);

/// Mock backends when cfg.mock, otherwise HTTP clients for each role.
BackendSet make_backends(const RunConfig& cfg);

} // namespace mforge
