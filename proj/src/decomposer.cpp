// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/decomposer.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "mforge/errors.hpp"
#include "mforge/hashing.hpp"
#include "mforge/prompts.hpp"
#include "mforge/reask.hpp"
#include "mforge/tag_parser.hpp"

namespace mforge {

DecompositionScore::DecompositionScore(double score, std::string explanation, bool clamped)
    : score_(score), explanation_(std::move(explanation)), clamped_(clamped) {
    if (!std::isfinite(score) || score < 0.0 || score > 1.0)
        throw Error(ErrorCode::InvalidArgument, "decomposition score must lie in [0, 1]", "score");
}

json to_json(const DecompositionScore& s) {
    return {{"score", s.score()}, {"explanation", s.explanation()}, {"clamped", s.clamped()}};
}

DecomposeResult parse_decomposition(std::string_view raw, const TokenCounter& counter) {
    TagMap tags = parse_tagged(raw, prompts::kDecompositionTags);
    for (const char* name : {"source", "target", "intended_meaning", "visual_prompt"}) {
        if (tags.at(name).empty())
            throw Error(ErrorCode::MissingTag, std::string("tag <") + name + "> is empty", name);
    }
    return DecomposeResult{
        Decomposition(tags["source"], tags["target"], tags["intended_meaning"], tags["reasoning"]),
        VisualPrompt(tags["visual_prompt"], PromptOrigin::initial(), counter),
        std::string(raw),
    };
}

DecompositionScore parse_decomposition_score(std::string_view raw) {
    TagMap tags = parse_tagged(raw, prompts::kDecompositionScoreTags);
    auto s = clamp_unit(parse_score(tags["decomposition_score"], "decomposition_score"));
    return DecompositionScore(s.value, tags["explanation"], s.clamped);
}

Decomposer::Decomposer(std::shared_ptr<ChatBackend> llm, std::shared_ptr<ChatBackend> judge, TokenCounter counter)
    : llm_(std::move(llm)), judge_(std::move(judge)), counter_(std::move(counter)) {
    if (!llm_ || !judge_) throw Error(ErrorCode::InvalidArgument, "decomposer needs an LLM and a judge backend");
}

DecomposeResult Decomposer::decompose(const Metaphor& metaphor) const {
    return ask_with_reask<DecomposeResult>(
        *llm_, {}, prompts::decomposition_messages(metaphor.text()),
        prompts::corrective_suffix(prompts::kDecompositionTags),
        [this](const std::string& raw) { return parse_decomposition(raw, counter_); });
}

DecompositionScore Decomposer::score_decomposition(const Metaphor& metaphor, const Decomposition& d) {
    const std::string key = sha256_hex(nlohmann::json::array({metaphor.id(), metaphor.text(), d.source(), d.target(),
                                                              d.meaning()})
                                           .dump());
    auto [score, computed] = memo_.get_or_compute(key, [&] {
        ++judge_evaluations_;
        std::vector<ChatMessage> messages{{"user", prompts::decomposition_score_request(metaphor.text(), d), {}}};
        auto result = ask_with_reask<DecompositionScore>(
            *judge_, {}, std::move(messages), prompts::corrective_suffix(prompts::kDecompositionScoreTags),
            [](const std::string& raw) { return parse_decomposition_score(raw); });
        if (result.clamped()) spdlog::warn("decomposition score for {} was clamped", metaphor.id());
        return std::make_shared<const DecompositionScore>(std::move(result));
    });
    return *score;
}

} // namespace mforge
