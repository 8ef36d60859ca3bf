// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>

#include "mforge/decomposer.hpp"
#include "mforge/judge.hpp"
#include "mforge/rewards.hpp"
#include "mforge/single_flight.hpp"

namespace mforge {

struct EvaluationInput {
    Metaphor metaphor;
    Decomposition decomposition;
    double decomposition_score = 0.0;
    VisualPrompt prompt;
    GenerationParams params;
    WeightConfig weights;
    /// Only consulted when weights.include_grpo_extras is set.
    std::optional<double> format_reward;
};

struct Evaluation {
    ImageArtifact image;
    VlmAnalysis analysis;
    RewardBreakdown breakdown;
};

/// generate -> analyze -> score for one visual prompt.
class ImageEvaluator {
public:
    virtual ~ImageEvaluator() = default;
    virtual Evaluation evaluate(const EvaluationInput& input) = 0;
};

/// The production evaluator: image backend, VLM judge (tag dialect),
/// CLIP-style score against the prompt and three BERT-style similarities
/// (S vs S', T vs T', M vs M').
class PipelineEvaluator : public ImageEvaluator {
public:
    PipelineEvaluator(std::shared_ptr<ImageBackend> images, std::shared_ptr<Judge> judge,
                      std::shared_ptr<SimilarityScorer> similarity);

    Evaluation evaluate(const EvaluationInput& input) override;

    std::size_t images_generated() const noexcept { return images_generated_; }
    std::size_t analyses() const noexcept { return analyses_; }

private:
    std::shared_ptr<ImageBackend> images_;
    std::shared_ptr<Judge> judge_;
    std::shared_ptr<SimilarityScorer> similarity_;
    std::atomic<std::size_t> images_generated_{0};
    std::atomic<std::size_t> analyses_{0};
};

struct CacheStats {
    std::size_t hits = 0;         ///< served from memory without any backend call
    std::size_t disk_hits = 0;    ///< loaded from the on-disk cache
    std::size_t evaluations = 0;  ///< full evaluations run
    std::size_t failures = 0;     ///< evaluations that threw (never cached)
};

/// Scores completions once per unique CompletionKey. The cache keeps the
/// model-derived components; weights and the format/length extras are
/// applied per call, so a hit never touches a backend. Concurrent misses
/// on one key share a single evaluation. Optionally mirrors entries to
/// `{cache_dir}/{digest}.json`.
class RewardCalculator {
public:
    RewardCalculator(std::shared_ptr<Decomposer> decomposer, std::shared_ptr<ImageEvaluator> evaluator,
                     std::optional<std::filesystem::path> cache_dir = std::nullopt);

    RewardBreakdown score_completion(const CompletionKey& key, const Metaphor& metaphor, const Decomposition& d,
                                     const VisualPrompt& prompt, const GenerationParams& params,
                                     const WeightConfig& weights, std::optional<double> format_reward = std::nullopt);

    CacheStats stats() const;
    std::size_t cached_entries() const { return cache_.size(); }

private:
    std::optional<RewardComponents> load_from_disk(const CompletionKey& key) const;
    void store_to_disk(const CompletionKey& key, const RewardBreakdown& base) const;

    std::shared_ptr<Decomposer> decomposer_;
    std::shared_ptr<ImageEvaluator> evaluator_;
    std::optional<std::filesystem::path> cache_dir_;
    SingleFlight<CompletionKey, std::shared_ptr<const RewardComponents>> cache_;
    std::atomic<std::size_t> hits_{0}, disk_hits_{0}, evaluations_{0}, failures_{0};
};

} // namespace mforge
