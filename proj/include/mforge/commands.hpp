// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mforge/config.hpp"
#include "mforge/decomposer.hpp"
#include "mforge/evaluation.hpp"
#include "mforge/judge.hpp"
#include "mforge/refinery.hpp"

namespace mforge {

/// One metaphor per non-blank line, or CSV with an `id,text,category`
/// header (chosen by a .csv extension or that header). Lines starting
/// with '#' are comments in the plain format. Throws Error{Config} on
/// duplicate ids and Error{Io} when unreadable; may return empty.
std::vector<Metaphor> load_dataset(const std::filesystem::path& path);

/// Minimal RFC 4180 field splitting for one record (quotes, "" escapes).
std::vector<std::string> split_csv_line(std::string_view line);

struct Pipeline {
    BackendSet backends;
    std::shared_ptr<Decomposer> decomposer;
    std::shared_ptr<Judge> judge;
    std::shared_ptr<SimilarityScorer> similarity;
    std::shared_ptr<PipelineEvaluator> evaluator;
};

Pipeline make_pipeline(BackendSet backends, double clip_scale = 1.0);

// ---------------------------------------------------------------------------
// Aggregation over runs.jsonl records
// ---------------------------------------------------------------------------

/// Means of the selected iteration's metrics over a set of runs.
struct MetricMeans {
    std::size_t count = 0;
    double decomposition = 0.0;
    double clip = 0.0;
    double m_align = 0.0;
    double s_presence = 0.0;
    double t_presence = 0.0;
    double bert_s = 0.0;
    double bert_t = 0.0;
    double bert_m = 0.0;
    double total = 0.0;
};

MetricMeans mean_metrics(std::span<const json> runs);

/// Columns: Decomposition, CLIP, MA, S-p, T-p, BERT-S, BERT-T, BERT-M, Total.
std::string metrics_table(const std::vector<std::pair<std::string, MetricMeans>>& rows);

struct RunsFile {
    std::vector<json> runs;
    std::size_t skipped_lines = 0;
};

/// Malformed lines are skipped with a warning.
RunsFile read_runs(const std::filesystem::path& path);

std::string report_markdown(const RunsFile& file, std::size_t short_max_words = 5);

// ---------------------------------------------------------------------------
// Evaluating externally generated images
// ---------------------------------------------------------------------------

struct EvalPair {
    Metaphor metaphor;
    std::filesystem::path image;
    std::optional<Decomposition> stm;
    /// Text the image was generated from; CLIP uses the metaphor otherwise.
    std::optional<std::string> prompt;
};

/// JSONL: {"metaphor", "image", optional "id", "category", "source",
/// "target", "meaning", "prompt"}. Relative image paths resolve against
/// the pairs file's directory.
std::vector<EvalPair> load_eval_pairs(const std::filesystem::path& path);

struct EvalRow {
    std::string id;
    std::optional<double> clip, m_align, decomposition, s_presence, t_presence, bert_s, bert_t, bert_m;
    std::optional<std::string> error;
};

EvalRow evaluate_pair(const Pipeline& pipeline, const EvalPair& pair);
/// Columns: CLIP, MA, Decomposition, S-p, T-p, BERT-S, BERT-T, BERT-M;
/// "-" for metrics a row does not have.
std::string eval_table(std::span<const EvalRow> rows);

// ---------------------------------------------------------------------------
// Subcommands. Each returns the process exit code.
// ---------------------------------------------------------------------------

int cmd_run(const RunConfig& cfg, std::ostream& out);
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& pairs, std::ostream& out);
int cmd_report(const std::filesystem::path& runs, std::size_t short_max_words, std::ostream& out);
/// Blocks serving /v1/score and /v1/health on cfg.listen.
int cmd_serve(const RunConfig& cfg, std::optional<std::string> bearer_token, std::ostream& out);

} // namespace mforge
