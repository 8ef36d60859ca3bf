// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/evaluation.hpp"

#include <fstream>

#include <spdlog/spdlog.h>

#include "mforge/errors.hpp"

namespace mforge {

PipelineEvaluator::PipelineEvaluator(std::shared_ptr<ImageBackend> images, std::shared_ptr<Judge> judge,
                                     std::shared_ptr<SimilarityScorer> similarity)
    : images_(std::move(images)), judge_(std::move(judge)), similarity_(std::move(similarity)) {
    if (!images_ || !judge_ || !similarity_) throw Error(ErrorCode::InvalidArgument, "evaluator is missing a backend");
}

Evaluation PipelineEvaluator::evaluate(const EvaluationInput& in) {
    ImageArtifact image = images_->generate(in.prompt, in.params);
    ++images_generated_;
    VlmAnalysis analysis = judge_->analyze_with_stm(image, in.metaphor, in.decomposition);
    ++analyses_;

    RewardComponents c;
    c.decomposition = in.decomposition_score;
    c.clip = similarity_->clip_score(image, in.prompt);
    c.s_presence = analysis.s_presence();
    c.t_presence = analysis.t_presence();
    c.m_align = analysis.m_align();
    auto bs = similarity_->bert_similarity(in.decomposition.source(), analysis.s_prime());
    auto bt = similarity_->bert_similarity(in.decomposition.target(), analysis.t_prime());
    auto bm = similarity_->bert_similarity(in.decomposition.meaning(), analysis.m_prime());
    c.bert_s = bs.value;
    c.bert_t = bt.value;
    c.bert_m = bm.value;
    if (bs.sequence_fallback || bt.sequence_fallback || bm.sequence_fallback) c.flags.insert("bert:sequence_fallback");
    for (const auto& f : analysis.flags()) c.flags.insert("vlm:" + f);
    if (in.prompt.over_budget()) c.flags.insert("prompt:over_budget");
    if (in.weights.include_grpo_extras) {
        c.format = in.format_reward.value_or(1.0);
        c.length = length_reward(in.prompt);
    }
    RewardBreakdown breakdown = composite_reward(c, in.weights);
    return Evaluation{std::move(image), std::move(analysis), std::move(breakdown)};
}

RewardCalculator::RewardCalculator(std::shared_ptr<Decomposer> decomposer, std::shared_ptr<ImageEvaluator> evaluator,
                                   std::optional<std::filesystem::path> cache_dir)
    : decomposer_(std::move(decomposer)), evaluator_(std::move(evaluator)), cache_dir_(std::move(cache_dir)) {
    if (!decomposer_ || !evaluator_) throw Error(ErrorCode::InvalidArgument, "reward calculator is missing a dependency");
    if (cache_dir_) std::filesystem::create_directories(*cache_dir_);
}

std::optional<RewardComponents> RewardCalculator::load_from_disk(const CompletionKey& key) const {
    if (!cache_dir_) return std::nullopt;
    auto path = *cache_dir_ / (key.digest + ".json");
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
        auto j = json::parse(in);
        RewardComponents c = reward_breakdown_from_json(j).components();
        c.format.reset();
        c.length.reset();
        return c;
    } catch (const std::exception& e) {
        spdlog::warn("ignoring unreadable cache entry {}: {}", path.string(), e.what());
        return std::nullopt;
    }
}

void RewardCalculator::store_to_disk(const CompletionKey& key, const RewardBreakdown& base) const {
    if (!cache_dir_) return;
    auto path = *cache_dir_ / (key.digest + ".json");
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) {
            spdlog::warn("cannot write cache entry {}", path.string());
            return;
        }
        out << to_json(base).dump(2) << '\n';
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) spdlog::warn("cannot finalize cache entry {}: {}", path.string(), ec.message());
}

RewardBreakdown RewardCalculator::score_completion(const CompletionKey& key, const Metaphor& metaphor,
                                                   const Decomposition& d, const VisualPrompt& prompt,
                                                   const GenerationParams& params, const WeightConfig& weights,
                                                   std::optional<double> format_reward) {
    auto [components, computed] = cache_.get_or_compute(key, [&]() -> std::shared_ptr<const RewardComponents> {
        if (auto disk = load_from_disk(key)) {
            ++disk_hits_;
            return std::make_shared<const RewardComponents>(std::move(*disk));
        }
        try {
            double dscore = decomposer_->score_decomposition(metaphor, d).score();
            WeightConfig base = weights;
            base.include_grpo_extras = false;
            ++evaluations_;
            Evaluation ev = evaluator_->evaluate(EvaluationInput{metaphor, d, dscore, prompt, params, base, std::nullopt});
            store_to_disk(key, ev.breakdown);
            return std::make_shared<const RewardComponents>(ev.breakdown.components());
        } catch (...) {
            ++failures_;
            throw;
        }
    });
    if (!computed) ++hits_;
    RewardComponents c = *components;
    if (weights.include_grpo_extras) {
        c.format = format_reward.value_or(1.0);
        c.length = length_reward(prompt);
    }
    return composite_reward(c, weights);
}

CacheStats RewardCalculator::stats() const {
    return CacheStats{hits_.load(), disk_hits_.load(), evaluations_.load(), failures_.load()};
}

} // namespace mforge
