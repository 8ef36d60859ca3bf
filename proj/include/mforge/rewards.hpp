// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mforge/backends.hpp"
#include "mforge/model.hpp"

namespace mforge {

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

/// Per-metric weights w_k. Defaults: 0.20 for decomposition and CLIP,
/// 0.10 for every other metric. Format and length only count when
/// `include_grpo_extras` is set; totals are not renormalized unless
/// `normalize` is switched on.
struct WeightConfig {
    double decomposition = 0.20;
    double clip = 0.20;
    double s_presence = 0.10;
    double t_presence = 0.10;
    double m_align = 0.10;
    double bert_s = 0.10;
    double bert_t = 0.10;
    double bert_m = 0.10;
    double format = 0.10;
    double length = 0.10;
    bool include_grpo_extras = false;
    bool normalize = false;

    /// Throws Error{Config} on negative or non-finite weights.
    void validate() const;

    /// Sum of the active weights, accumulated on a 1e-9 decimal grid so
    /// that decimal configs sum exactly (0.2+0.2+6*0.1 == 1.0).
    double active_sum() const;

    friend bool operator==(const WeightConfig&, const WeightConfig&) = default;
};

json to_json(const WeightConfig& w);
/// Overlays the keys present in `j` onto `base`.
WeightConfig weights_from_json(const json& j, WeightConfig base = {});

// ---------------------------------------------------------------------------
// Reward components and their weighted sum
// ---------------------------------------------------------------------------

struct RewardComponents {
    double decomposition = 0.0;
    double clip = 0.0;
    double s_presence = 0.0;
    double t_presence = 0.0;
    double m_align = 0.0;
    double bert_s = 0.0;
    double bert_t = 0.0;
    double bert_m = 0.0;
    std::optional<double> format;
    std::optional<double> length;
    std::set<std::string> flags;

    RewardComponents scaled(double alpha) const;
};

/// Result of composite_reward: the components, the weights applied, and
/// total = sum_k w_k * r_k (divided by the weight sum if normalizing).
class RewardBreakdown {
public:
    const RewardComponents& components() const noexcept { return components_; }
    const WeightConfig& weights() const noexcept { return weights_; }
    double total() const noexcept { return total_; }
    const std::set<std::string>& fallback_flags() const noexcept { return components_.flags; }

private:
    friend RewardBreakdown composite_reward(const RewardComponents&, const WeightConfig&);
    RewardBreakdown(RewardComponents c, WeightConfig w, double total)
        : components_(std::move(c)), weights_(w), total_(total) {}

    RewardComponents components_;
    WeightConfig weights_;
    double total_;
};

/// Validates ranges (unit metrics in [0, 1], clip >= 0) and applies the
/// weights. Throws Error{MissingComponent} when extras are enabled but
/// format/length are absent; extras are dropped when disabled.
RewardBreakdown composite_reward(const RewardComponents& components, const WeightConfig& weights);

json to_json(const RewardBreakdown& b);
/// Rebuilds via composite_reward and checks the stored total agrees.
RewardBreakdown reward_breakdown_from_json(const json& j);
json to_json(const RewardComponents& c);
RewardComponents reward_components_from_json(const json& j);

// ---------------------------------------------------------------------------
// Individual metrics
// ---------------------------------------------------------------------------

/// Throws Error{DimensionMismatch} on unequal lengths; 0 for zero vectors.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// scale * max(0, cos(image, text)); scale defaults to 1 (unscaled).
double clip_score_from_embeddings(const EmbeddingVector& image, const EmbeddingVector& text, double scale = 1.0);

struct BertScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Greedy token matching: recall averages, over reference tokens, the best
/// cosine against any candidate token; precision swaps the roles. F1 is
/// the harmonic mean clamped into [0, 1].
BertScore bert_score(const EmbeddingVector& reference, const EmbeddingVector& candidate);

/// Fraction of `required_tags` present and well formed in `raw`.
double format_reward(std::string_view raw, std::span<const std::string_view> required_tags);

/// 1 within the 77-token budget, then linear decay to 0 at twice the budget.
double length_reward(std::size_t token_count);
double length_reward(const VisualPrompt& prompt);

/// a_i = r_i - mean(r); no division by the standard deviation.
std::vector<double> group_advantages(std::span<const double> rewards);

// ---------------------------------------------------------------------------
// Backend-backed similarity
// ---------------------------------------------------------------------------

struct Similarity {
    double value = 0.0;
    bool sequence_fallback = false;
};

class SimilarityScorer {
public:
    explicit SimilarityScorer(std::shared_ptr<EmbeddingBackend> backend, double clip_scale = 1.0);

    double clip_score(const ImageArtifact& image, const VisualPrompt& prompt) const;

    /// Per-token F1 when the backend serves token vectors; otherwise the
    /// clamped sequence-level cosine, with `sequence_fallback` set.
    Similarity bert_similarity(std::string_view reference, std::string_view candidate) const;

    BertScore bert_score_for(std::string_view reference, std::string_view candidate) const;

private:
    std::shared_ptr<EmbeddingBackend> backend_;
    double clip_scale_;
};

// ---------------------------------------------------------------------------
// Completion identity
// ---------------------------------------------------------------------------

struct CompletionKey {
    std::string digest;
    friend bool operator==(const CompletionKey&, const CompletionKey&) = default;
    friend auto operator<=>(const CompletionKey&, const CompletionKey&) = default;
};

/// SHA-256 over (metaphor id, S, T, M, prompt text, generation params).
/// The free-text reasoning does not take part.
CompletionKey make_completion_key(const Metaphor& metaphor, const Decomposition& d, const VisualPrompt& prompt,
                                  const GenerationParams& params);

} // namespace mforge
