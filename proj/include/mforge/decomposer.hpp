// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "mforge/backends.hpp"
#include "mforge/model.hpp"
#include "mforge/single_flight.hpp"

namespace mforge {

/// Judge's verdict on an S-T-M decomposition, clamped into [0, 1].
class DecompositionScore {
public:
    /// Throws Error{InvalidArgument} outside [0, 1] or for non-finite input.
    DecompositionScore(double score, std::string explanation, bool clamped = false);

    double score() const noexcept { return score_; }
    const std::string& explanation() const noexcept { return explanation_; }
    /// The judge emitted an out-of-range value that was clamped.
    bool clamped() const noexcept { return clamped_; }

private:
    double score_;
    std::string explanation_;
    bool clamped_;
};

json to_json(const DecompositionScore& s);

struct DecomposeResult {
    Decomposition decomposition;
    VisualPrompt prompt;
    std::string raw;  ///< reply that was parsed
};

/// Parses the five-tag completion. Empty source/target/meaning/prompt
/// content counts as a missing tag.
DecomposeResult parse_decomposition(std::string_view raw, const TokenCounter& counter = default_token_counter());
DecompositionScore parse_decomposition_score(std::string_view raw);

/// Produces the S-T-M decomposition and initial visual prompt for a
/// metaphor, and judges decomposition quality once per distinct
/// (metaphor, decomposition) pair for the lifetime of the instance.
class Decomposer {
public:
    Decomposer(std::shared_ptr<ChatBackend> llm, std::shared_ptr<ChatBackend> judge,
               TokenCounter counter = default_token_counter());

    DecomposeResult decompose(const Metaphor& metaphor) const;

    /// Memoized and single-flight across threads.
    DecompositionScore score_decomposition(const Metaphor& metaphor, const Decomposition& d);

    /// Number of judge evaluations actually performed (memo misses).
    std::size_t judge_evaluations() const noexcept { return judge_evaluations_; }

    const TokenCounter& token_counter() const noexcept { return counter_; }

private:
    std::shared_ptr<ChatBackend> llm_;
    std::shared_ptr<ChatBackend> judge_;
    TokenCounter counter_;
    SingleFlight<std::string, std::shared_ptr<const DecompositionScore>> memo_;
    std::atomic<std::size_t> judge_evaluations_{0};
};

} // namespace mforge
