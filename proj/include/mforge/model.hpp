// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mforge {

using json = nlohmann::json;

/// Hard budget the image generator's text encoder accepts.
inline constexpr std::size_t kPromptTokenBudget = 77;

std::string trim(std::string_view s);

// ---------------------------------------------------------------------------
// Token counting
// ---------------------------------------------------------------------------

/// Splits on whitespace; every punctuation character is its own token and
/// runs of alphanumerics (plus non-ASCII bytes) form one token. This is an
/// approximation of the CLIP text-encoder length, not a BPE count.
std::vector<std::string> split_tokens(std::string_view text);
std::size_t count_tokens(std::string_view text);

using TokenCounter = std::function<std::size_t(std::string_view)>;
const TokenCounter& default_token_counter();

// ---------------------------------------------------------------------------
// Metaphor
// ---------------------------------------------------------------------------

class Metaphor {
public:
    /// Throws Error{EmptyMetaphor} when `text` is blank. An empty id is
    /// replaced by one derived from the text's content hash.
    Metaphor(std::string id, std::string_view text, std::optional<std::string> category = std::nullopt);

    const std::string& id() const noexcept { return id_; }
    const std::string& text() const noexcept { return text_; }
    const std::optional<std::string>& category() const noexcept { return category_; }

    std::size_t word_count() const;

    friend bool operator==(const Metaphor&, const Metaphor&) = default;

private:
    std::string id_;
    std::string text_;
    std::optional<std::string> category_;
};

Metaphor validate_metaphor(std::string_view raw);
std::string metaphor_id_for(std::string_view trimmed_text);

// ---------------------------------------------------------------------------
// Decomposition (S, T, M + reasoning)
// ---------------------------------------------------------------------------

class Decomposition {
public:
    /// Source, target and meaning must be non-blank (Error{InvalidArgument}).
    Decomposition(std::string_view source, std::string_view target, std::string_view meaning,
                  std::string_view reasoning = {});

    const std::string& source() const noexcept { return source_; }
    const std::string& target() const noexcept { return target_; }
    const std::string& meaning() const noexcept { return meaning_; }
    const std::string& reasoning() const noexcept { return reasoning_; }

    friend bool operator==(const Decomposition&, const Decomposition&) = default;

private:
    std::string source_;
    std::string target_;
    std::string meaning_;
    std::string reasoning_;
};

// ---------------------------------------------------------------------------
// VisualPrompt
// ---------------------------------------------------------------------------

struct PromptOrigin {
    /// Empty for the initial prompt, otherwise the iteration it was produced for.
    std::optional<int> refined_iteration;

    static PromptOrigin initial() { return {}; }
    static PromptOrigin refined(int iteration) { return {iteration}; }
    bool is_initial() const noexcept { return !refined_iteration.has_value(); }

    friend bool operator==(const PromptOrigin&, const PromptOrigin&) = default;
};

class VisualPrompt {
public:
    explicit VisualPrompt(std::string text, PromptOrigin origin = PromptOrigin::initial(),
                          const TokenCounter& counter = default_token_counter());

    const std::string& text() const noexcept { return text_; }
    std::size_t token_count() const noexcept { return token_count_; }
    const PromptOrigin& origin() const noexcept { return origin_; }

    /// Over-budget prompts are kept verbatim; the length reward penalizes them.
    bool over_budget() const noexcept { return token_count_ > kPromptTokenBudget; }

    friend bool operator==(const VisualPrompt&, const VisualPrompt&) = default;

private:
    std::string text_;
    std::size_t token_count_;
    PromptOrigin origin_;
};

// ---------------------------------------------------------------------------
// Generation parameters and images
// ---------------------------------------------------------------------------

class GenerationParams {
public:
    GenerationParams(double guidance_scale, int inference_steps, int width, int height,
                     std::optional<std::uint64_t> seed = std::nullopt);

    /// guidance 4.5, 8 steps, 768x768
    static GenerationParams turbo();
    /// guidance 1.5, 20 steps, 1024x1024
    static GenerationParams quality();

    double guidance_scale() const noexcept { return guidance_scale_; }
    int inference_steps() const noexcept { return inference_steps_; }
    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    const std::optional<std::uint64_t>& seed() const noexcept { return seed_; }

    GenerationParams with_seed(std::optional<std::uint64_t> seed) const;

    friend bool operator==(const GenerationParams&, const GenerationParams&) = default;

private:
    double guidance_scale_;
    int inference_steps_;
    int width_;
    int height_;
    std::optional<std::uint64_t> seed_;
};

json to_json(const GenerationParams& p);
GenerationParams generation_params_from_json(const json& j);

class ImageArtifact {
public:
    ImageArtifact(std::vector<std::uint8_t> bytes, GenerationParams params, std::string prompt_text);

    std::span<const std::uint8_t> bytes() const noexcept { return *bytes_; }
    const std::string& content_hash() const noexcept { return content_hash_; }
    const GenerationParams& params() const noexcept { return params_; }
    const std::string& prompt_text() const noexcept { return prompt_text_; }

private:
    std::shared_ptr<const std::vector<std::uint8_t>> bytes_;
    std::string content_hash_;
    GenerationParams params_;
    std::string prompt_text_;
};

json to_json(const Metaphor& m);
json to_json(const Decomposition& d);
json to_json(const VisualPrompt& p);

} // namespace mforge
