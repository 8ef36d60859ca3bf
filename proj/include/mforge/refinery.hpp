// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mforge/decomposer.hpp"
#include "mforge/evaluation.hpp"

namespace mforge {

struct ImageRef {
    std::string content_hash;
    std::string path;  ///< relative to the output directory
};

struct IterationRecord {
    int index = 0;
    VisualPrompt prompt{""};
    std::optional<ImageRef> image_ref;
    std::optional<VlmAnalysis> analysis;
    std::optional<RewardBreakdown> breakdown;
    /// Reply of the refinement call made after this iteration.
    std::optional<std::string> refinement_raw;
    /// Set when the iteration failed; such iterations never get selected.
    std::optional<std::string> error;
    std::set<std::string> flags;

    bool failed() const noexcept { return !breakdown.has_value(); }
    /// breakdown.total, or -infinity for a failed iteration.
    double selection_reward() const noexcept;
};

struct RunRecord {
    Metaphor metaphor{"", "x"};
    Decomposition decomposition{"s", "t", "m"};
    DecompositionScore decomposition_score{0.0, ""};
    std::vector<IterationRecord> iterations;
    int selected_index = 0;
    json config_snapshot = json::object();
    std::optional<std::string> timestamp;

    const IterationRecord& selected() const { return iterations.at(static_cast<std::size_t>(selected_index)); }
};

/// First index with the largest total; failed iterations are skipped.
/// Throws Error{RunFailed} when every iteration failed (or none exist).
int select_iteration(std::span<const IterationRecord> iterations);

json to_json(const IterationRecord& it);
json to_json(const RunRecord& run);

struct Refinement {
    VisualPrompt prompt;
    std::string raw;
    /// The reply stayed empty after the re-ask; `prompt` is the old one.
    bool fallback = false;
};

/// "- Name: 0.1234" lines for the refinement request.
std::string scores_summary(const RewardBreakdown& breakdown);

struct RefineryOptions {
    /// Images go to `{out_dir}/{metaphor_id}/iter_{index}.png` when set.
    std::optional<std::filesystem::path> out_dir;
    json config_snapshot = json::object();
    bool timestamps = true;
};

/// generate -> evaluate -> refine for N iterations, then keep the best.
class Refinery {
public:
    Refinery(std::shared_ptr<Decomposer> decomposer, std::shared_ptr<ImageEvaluator> evaluator,
             std::shared_ptr<ChatBackend> llm, RefineryOptions options = {});

    /// Throws Error{InvalidArgument} for n_iterations < 1 and
    /// Error{RunFailed} when every iteration failed. Errors from the
    /// decomposition step propagate unchanged.
    RunRecord run_metaphor(const Metaphor& metaphor, int n_iterations, const GenerationParams& params,
                           const WeightConfig& weights);

    /// Asks the LLM for the next prompt; produced for iteration `next_index`.
    Refinement refine_prompt(const Metaphor& metaphor, const Decomposition& d, double decomposition_score,
                             const VisualPrompt& current, const RewardBreakdown& breakdown,
                             const VlmAnalysis& analysis, int next_index);

    std::size_t refinement_calls() const noexcept { return refinement_calls_; }

private:
    std::shared_ptr<Decomposer> decomposer_;
    std::shared_ptr<ImageEvaluator> evaluator_;
    std::shared_ptr<ChatBackend> llm_;
    RefineryOptions options_;
    std::atomic<std::size_t> refinement_calls_{0};
};

/// Appends RunRecords to runs.jsonl in submission order, whatever order
/// the runs finish in. Slots that will never produce a record are skipped.
class RunWriter {
public:
    explicit RunWriter(std::filesystem::path path);

    void submit(std::size_t slot, const RunRecord& run);
    void skip(std::size_t slot);
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    void flush_ready();

    std::filesystem::path path_;
    std::mutex mu_;
    std::size_t next_ = 0;
    std::map<std::size_t, std::optional<std::string>> pending_;
};

struct BatchOutcome {
    std::optional<RunRecord> run;
    std::optional<std::string> error;
};

/// Runs every metaphor with up to `parallelism` runs in flight. Outcomes
/// come back in input order; `writer` (optional) gets each finished run.
std::vector<BatchOutcome> run_batch(Refinery& refinery, std::span<const Metaphor> metaphors, int n_iterations,
                                    const GenerationParams& params, const WeightConfig& weights, int parallelism,
                                    RunWriter* writer = nullptr);

} // namespace mforge
