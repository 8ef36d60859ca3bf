// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/refinery.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mforge/errors.hpp"
#include "mforge/prompts.hpp"
#include "mforge/reask.hpp"
#include "mforge/tag_parser.hpp"

namespace mforge {

namespace {

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

} // namespace

double IterationRecord::selection_reward() const noexcept {
    return breakdown ? breakdown->total() : -std::numeric_limits<double>::infinity();
}

int select_iteration(std::span<const IterationRecord> iterations) {
    int best = -1;
    double best_total = 0.0;
    for (std::size_t i = 0; i < iterations.size(); ++i) {
        if (iterations[i].failed()) continue;
        double t = iterations[i].breakdown->total();
        if (best < 0 || t > best_total) {
            best = static_cast<int>(i);
            best_total = t;
        }
    }
    if (best < 0) throw Error(ErrorCode::RunFailed, "no iteration completed");
    return best;
}

json to_json(const IterationRecord& it) {
    json j;
    j["index"] = it.index;
    j["prompt"] = to_json(it.prompt);
    j["image_ref"] = it.image_ref ? json{{"content_hash", it.image_ref->content_hash}, {"path", it.image_ref->path}}
                                  : json(nullptr);
    j["analysis"] = it.analysis ? to_json(*it.analysis) : json(nullptr);
    j["breakdown"] = it.breakdown ? to_json(*it.breakdown) : json(nullptr);
    j["refinement_raw"] = it.refinement_raw ? json(*it.refinement_raw) : json(nullptr);
    j["error"] = it.error ? json(*it.error) : json(nullptr);
    j["flags"] = it.flags;
    return j;
}

json to_json(const RunRecord& run) {
    json j;
    j["metaphor"] = to_json(run.metaphor);
    j["decomposition"] = to_json(run.decomposition);
    j["decomposition_score"] = to_json(run.decomposition_score);
    json iters = json::array();
    for (const auto& it : run.iterations) iters.push_back(to_json(it));
    j["iterations"] = std::move(iters);
    j["selected_index"] = run.selected_index;
    j["config_snapshot"] = run.config_snapshot;
    j["metadata"] = {{"analysis_dialect", "tags"}, {"bert_baseline_rescaling", false}};
    if (run.timestamp) j["timestamp"] = *run.timestamp;
    return j;
}

std::string scores_summary(const RewardBreakdown& b) {
    const auto& c = b.components();
    std::string out;
    auto line = [&](std::string_view name, double v) { out += fmt::format("- {}: {:.4f}\n", name, v); };
    line("Decomposition", c.decomposition);
    line("CLIP", c.clip);
    line("Source presence", c.s_presence);
    line("Target presence", c.t_presence);
    line("Meaning alignment", c.m_align);
    line("BERT source", c.bert_s);
    line("BERT target", c.bert_t);
    line("BERT meaning", c.bert_m);
    if (c.format) line("Format", *c.format);
    if (c.length) line("Length", *c.length);
    if (!out.empty()) out.pop_back();
    return out;
}

Refinery::Refinery(std::shared_ptr<Decomposer> decomposer, std::shared_ptr<ImageEvaluator> evaluator,
                   std::shared_ptr<ChatBackend> llm, RefineryOptions options)
    : decomposer_(std::move(decomposer)), evaluator_(std::move(evaluator)), llm_(std::move(llm)),
      options_(std::move(options)) {
    if (!decomposer_ || !evaluator_ || !llm_) throw Error(ErrorCode::InvalidArgument, "refinery is missing a dependency");
}

Refinement Refinery::refine_prompt(const Metaphor& metaphor, const Decomposition& d, double decomposition_score,
                                   const VisualPrompt& current, const RewardBreakdown& breakdown,
                                   const VlmAnalysis& analysis, int next_index) {
    prompts::RefinementContext ctx;
    ctx.metaphor = metaphor.text();
    ctx.source = d.source();
    ctx.target = d.target();
    ctx.meaning = d.meaning();
    ctx.decomposition_quality = decomposition_score;
    ctx.current_prompt = current.text();
    ctx.reward = breakdown.total();
    ctx.scores_summary = scores_summary(breakdown);
    // Absence phrases are rendered by the template itself.
    ctx.s_prime = analysis.flags().count("empty:s_prime") ? "" : analysis.s_prime();
    ctx.t_prime = analysis.flags().count("empty:t_prime") ? "" : analysis.t_prime();
    ctx.m_prime = analysis.flags().count("empty:m_prime") ? "" : analysis.m_prime();

    std::vector<ChatMessage> messages{ChatMessage{"user", prompts::refinement_request(ctx), {}}};
    const TokenCounter& counter = decomposer_->token_counter();
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (attempt == 1) messages.back().text += prompts::kCorrectiveSuffixPlain;
        ++refinement_calls_;
        std::string raw = llm_->complete("", messages);
        std::string text = strip_fences_and_quotes(raw);
        if (!trim(text).empty()) {
            return Refinement{VisualPrompt(trim(text), PromptOrigin::refined(next_index), counter), std::move(raw), false};
        }
        if (attempt == 1) return Refinement{current, std::move(raw), true};
    }
    return Refinement{current, "", true};
}

RunRecord Refinery::run_metaphor(const Metaphor& metaphor, int n_iterations, const GenerationParams& params,
                                 const WeightConfig& weights) {
    if (n_iterations < 1) throw Error(ErrorCode::InvalidArgument, "n_iterations must be >= 1");
    weights.validate();

    DecomposeResult dec = decomposer_->decompose(metaphor);
    DecompositionScore dscore = decomposer_->score_decomposition(metaphor, dec.decomposition);
    std::optional<double> fmt_reward;
    if (weights.include_grpo_extras) fmt_reward = format_reward(dec.raw, prompts::kDecompositionTags);

    RunRecord run;
    run.metaphor = metaphor;
    run.decomposition = dec.decomposition;
    run.decomposition_score = dscore;
    run.config_snapshot = options_.config_snapshot;

    VisualPrompt current = dec.prompt;
    for (int i = 0; i < n_iterations; ++i) {
        IterationRecord rec;
        rec.index = i;
        rec.prompt = current;
        if (current.over_budget()) rec.flags.insert("prompt:over_budget");
        std::optional<Evaluation> ev;
        try {
            ev = evaluator_->evaluate(
                EvaluationInput{metaphor, dec.decomposition, dscore.score(), current, params, weights, fmt_reward});
        } catch (const Error& e) {
            spdlog::warn("metaphor {} iteration {} failed: {}", metaphor.id(), i, e.what());
            rec.error = e.what();
        }
        if (ev) {
            std::string rel = fmt::format("{}/iter_{}.png", metaphor.id(), i);
            if (options_.out_dir) write_bytes(*options_.out_dir / rel, ev->image.bytes());
            rec.image_ref = ImageRef{ev->image.content_hash(), rel};
            rec.analysis = ev->analysis;
            rec.breakdown = ev->breakdown;
            if (i + 1 < n_iterations) {
                try {
                    Refinement r = refine_prompt(metaphor, dec.decomposition, dscore.score(), current, ev->breakdown,
                                                 ev->analysis, i + 1);
                    rec.refinement_raw = r.raw;
                    if (r.fallback) rec.flags.insert("refine:empty_reply");
                    current = r.prompt;
                } catch (const Error& e) {
                    spdlog::warn("metaphor {} refinement after iteration {} failed: {}", metaphor.id(), i, e.what());
                    rec.flags.insert("refine:failed");
                }
            }
        }
        run.iterations.push_back(std::move(rec));
    }
    run.selected_index = select_iteration(run.iterations);
    if (options_.timestamps) run.timestamp = utc_timestamp();
    return run;
}

// --- RunWriter -------------------------------------------------------------------

RunWriter::RunWriter(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream touch(path_, std::ios::app);
    if (!touch) throw Error(ErrorCode::Io, "cannot open " + path_.string());
}

void RunWriter::submit(std::size_t slot, const RunRecord& run) {
    std::string line = to_json(run).dump();
    std::lock_guard lock(mu_);
    pending_[slot] = std::move(line);
    flush_ready();
}

void RunWriter::skip(std::size_t slot) {
    std::lock_guard lock(mu_);
    pending_[slot] = std::nullopt;
    flush_ready();
}

void RunWriter::flush_ready() {
    std::ofstream out;
    while (!pending_.empty() && pending_.begin()->first == next_) {
        auto node = pending_.extract(pending_.begin());
        if (node.mapped()) {
            if (!out.is_open()) out.open(path_, std::ios::app);
            out << *node.mapped() << '\n';
        }
        ++next_;
    }
    if (out.is_open()) {
        out.flush();
        if (!out) throw Error(ErrorCode::Io, "cannot append to " + path_.string());
    }
}

std::vector<BatchOutcome> run_batch(Refinery& refinery, std::span<const Metaphor> metaphors, int n_iterations,
                                    const GenerationParams& params, const WeightConfig& weights, int parallelism,
                                    RunWriter* writer) {
    if (parallelism < 1) throw Error(ErrorCode::InvalidArgument, "parallelism must be >= 1");
    std::vector<BatchOutcome> outcomes(metaphors.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < metaphors.size(); i = next++) {
            try {
                outcomes[i].run = refinery.run_metaphor(metaphors[i], n_iterations, params, weights);
            } catch (const std::exception& e) {
                spdlog::error("run for {} failed: {}", metaphors[i].id(), e.what());
                outcomes[i].error = e.what();
            }
            if (!writer) continue;
            try {
                if (outcomes[i].run) {
                    writer->submit(i, *outcomes[i].run);
                } else {
                    writer->skip(i);
                }
            } catch (const std::exception& e) {
                spdlog::error("cannot record run for {}: {}", metaphors[i].id(), e.what());
                if (!outcomes[i].error) outcomes[i].error = e.what();
            }
        }
    };
    std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(parallelism), metaphors.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> threads;
        for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    }
    return outcomes;
}

} // namespace mforge
