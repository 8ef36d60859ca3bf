// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mforge/errors.hpp"
#include "mforge/hashing.hpp"
#include "mforge/tag_parser.hpp"

namespace mforge {

namespace {

constexpr double kNanoGrid = 1e9;

long long to_grid(double w) { return std::llround(w * kNanoGrid); }

void require_unit(double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw Error(ErrorCode::InvalidArgument, std::string(name) + " must lie in [0, 1]", name);
}

struct Term {
    const char* name;
    double weight;
    double value;
};

std::vector<Term> active_terms(const RewardComponents& c, const WeightConfig& w) {
    std::vector<Term> terms = {
        {"decomposition", w.decomposition, c.decomposition}, {"clip", w.clip, c.clip},
        {"s_presence", w.s_presence, c.s_presence},          {"t_presence", w.t_presence, c.t_presence},
        {"m_align", w.m_align, c.m_align},                   {"bert_s", w.bert_s, c.bert_s},
        {"bert_t", w.bert_t, c.bert_t},                      {"bert_m", w.bert_m, c.bert_m},
    };
    if (w.include_grpo_extras) {
        terms.push_back({"format", w.format, c.format.value_or(0.0)});
        terms.push_back({"length", w.length, c.length.value_or(0.0)});
    }
    return terms;
}

std::vector<std::vector<double>> unit_rows(const EmbeddingVector& e) {
    std::vector<std::vector<double>> rows = e.rows();
    for (auto& r : rows) {
        double n = std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0));
        if (n > 0.0)
            for (double& x : r) x /= n;
    }
    return rows;
}

} // namespace

// --- WeightConfig ---------------------------------------------------------------

void WeightConfig::validate() const {
    for (double w : {decomposition, clip, s_presence, t_presence, m_align, bert_s, bert_t, bert_m, format, length}) {
        if (!std::isfinite(w) || w < 0.0) throw Error(ErrorCode::Config, "reward weights must be finite and >= 0");
    }
}

double WeightConfig::active_sum() const {
    long long sum = to_grid(decomposition) + to_grid(clip) + to_grid(s_presence) + to_grid(t_presence) +
                    to_grid(m_align) + to_grid(bert_s) + to_grid(bert_t) + to_grid(bert_m);
    if (include_grpo_extras) sum += to_grid(format) + to_grid(length);
    return static_cast<double>(sum) / kNanoGrid;
}

json to_json(const WeightConfig& w) {
    return {{"decomposition", w.decomposition}, {"clip", w.clip},
            {"s_presence", w.s_presence},       {"t_presence", w.t_presence},
            {"m_align", w.m_align},             {"bert_s", w.bert_s},
            {"bert_t", w.bert_t},               {"bert_m", w.bert_m},
            {"format", w.format},               {"length", w.length},
            {"include_grpo_extras", w.include_grpo_extras}, {"normalize", w.normalize}};
}

WeightConfig weights_from_json(const json& j, WeightConfig base) {
    if (!j.is_object()) throw Error(ErrorCode::Config, "weights must be an object");
    auto num = [&](const char* key, double& field) {
        if (!j.contains(key)) return;
        if (!j[key].is_number()) throw Error(ErrorCode::Config, std::string("weight '") + key + "' must be a number", key);
        field = j[key].get<double>();
    };
    num("decomposition", base.decomposition);
    num("clip", base.clip);
    num("s_presence", base.s_presence);
    num("t_presence", base.t_presence);
    num("m_align", base.m_align);
    num("bert_s", base.bert_s);
    num("bert_t", base.bert_t);
    num("bert_m", base.bert_m);
    num("format", base.format);
    num("length", base.length);
    if (j.contains("include_grpo_extras")) base.include_grpo_extras = j["include_grpo_extras"].get<bool>();
    if (j.contains("normalize")) base.normalize = j["normalize"].get<bool>();
    base.validate();
    return base;
}

// --- composite ------------------------------------------------------------------

RewardComponents RewardComponents::scaled(double alpha) const {
    RewardComponents c = *this;
    for (double* f : {&c.decomposition, &c.clip, &c.s_presence, &c.t_presence, &c.m_align, &c.bert_s, &c.bert_t,
                      &c.bert_m})
        *f *= alpha;
    if (c.format) *c.format *= alpha;
    if (c.length) *c.length *= alpha;
    return c;
}

RewardBreakdown composite_reward(const RewardComponents& components, const WeightConfig& weights) {
    weights.validate();
    RewardComponents c = components;
    require_unit(c.decomposition, "decomposition");
    if (!std::isfinite(c.clip) || c.clip < 0.0) throw Error(ErrorCode::InvalidArgument, "clip must be finite and >= 0", "clip");
    require_unit(c.s_presence, "s_presence");
    require_unit(c.t_presence, "t_presence");
    require_unit(c.m_align, "m_align");
    require_unit(c.bert_s, "bert_s");
    require_unit(c.bert_t, "bert_t");
    require_unit(c.bert_m, "bert_m");
    if (weights.include_grpo_extras) {
        if (!c.format) throw Error(ErrorCode::MissingComponent, "format reward required with GRPO extras", "format");
        if (!c.length) throw Error(ErrorCode::MissingComponent, "length reward required with GRPO extras", "length");
        require_unit(*c.format, "format");
        require_unit(*c.length, "length");
    } else {
        c.format.reset();
        c.length.reset();
    }
    double total = 0.0;
    for (const auto& term : active_terms(c, weights)) total += term.weight * term.value;
    if (weights.normalize) {
        double sum = weights.active_sum();
        total = sum > 0.0 ? total / sum : 0.0;
    }
    return RewardBreakdown(std::move(c), weights, total);
}

json to_json(const RewardComponents& c) {
    json j = {{"decomposition", c.decomposition}, {"clip", c.clip},     {"s_presence", c.s_presence},
              {"t_presence", c.t_presence},       {"m_align", c.m_align}, {"bert_s", c.bert_s},
              {"bert_t", c.bert_t},               {"bert_m", c.bert_m}};
    j["format"] = c.format ? json(*c.format) : json(nullptr);
    j["length"] = c.length ? json(*c.length) : json(nullptr);
    j["fallback_flags"] = c.flags;
    return j;
}

RewardComponents reward_components_from_json(const json& j) {
    try {
        RewardComponents c;
        c.decomposition = j.at("decomposition").get<double>();
        c.clip = j.at("clip").get<double>();
        c.s_presence = j.at("s_presence").get<double>();
        c.t_presence = j.at("t_presence").get<double>();
        c.m_align = j.at("m_align").get<double>();
        c.bert_s = j.at("bert_s").get<double>();
        c.bert_t = j.at("bert_t").get<double>();
        c.bert_m = j.at("bert_m").get<double>();
        if (j.contains("format") && !j["format"].is_null()) c.format = j["format"].get<double>();
        if (j.contains("length") && !j["length"].is_null()) c.length = j["length"].get<double>();
        c.flags = j.value("fallback_flags", std::set<std::string>{});
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad reward components: ") + e.what());
    }
}

json to_json(const RewardBreakdown& b) {
    json j = to_json(b.components());
    j["total"] = b.total();
    j["weights"] = to_json(b.weights());
    return j;
}

RewardBreakdown reward_breakdown_from_json(const json& j) {
    WeightConfig w = weights_from_json(j.value("weights", json::object()));
    RewardBreakdown b = composite_reward(reward_components_from_json(j), w);
    if (j.contains("total") && std::abs(j["total"].get<double>() - b.total()) > 1e-9)
        throw Error(ErrorCode::InvalidArgument, "stored total disagrees with its components");
    return b;
}

// --- metrics --------------------------------------------------------------------

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "cosine of vectors with different dimensions");
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double clip_score_from_embeddings(const EmbeddingVector& image, const EmbeddingVector& text, double scale) {
    if (image.dimension() != text.dimension())
        throw Error(ErrorCode::DimensionMismatch, "image and text embeddings live in different spaces");
    return scale * std::max(0.0, cosine_similarity(image.values(), text.values()));
}

BertScore bert_score(const EmbeddingVector& reference, const EmbeddingVector& candidate) {
    if (reference.dimension() != candidate.dimension())
        throw Error(ErrorCode::DimensionMismatch, "token embeddings have different dimensions");
    const auto ref = unit_rows(reference);
    const auto cand = unit_rows(candidate);
    // sim[i][j] = <ref_i, cand_j>; recall uses row maxima, precision column maxima.
    std::vector<double> row_best(ref.size(), -1.0);
    std::vector<double> col_best(cand.size(), -1.0);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        for (std::size_t j = 0; j < cand.size(); ++j) {
            double s = std::inner_product(ref[i].begin(), ref[i].end(), cand[j].begin(), 0.0);
            row_best[i] = std::max(row_best[i], s);
            col_best[j] = std::max(col_best[j], s);
        }
    }
    BertScore out;
    out.recall = std::accumulate(row_best.begin(), row_best.end(), 0.0) / static_cast<double>(row_best.size());
    out.precision = std::accumulate(col_best.begin(), col_best.end(), 0.0) / static_cast<double>(col_best.size());
    double denom = out.precision + out.recall;
    out.f1 = denom > 0.0 ? std::clamp(2.0 * out.precision * out.recall / denom, 0.0, 1.0) : 0.0;
    return out;
}

double format_reward(std::string_view raw, std::span<const std::string_view> required_tags) {
    if (required_tags.empty()) return 1.0;
    std::size_t ok = 0;
    for (auto tag : required_tags)
        if (probe_tag(raw, tag) == TagStatus::Present) ++ok;
    return static_cast<double>(ok) / static_cast<double>(required_tags.size());
}

double length_reward(std::size_t token_count) {
    if (token_count <= kPromptTokenBudget) return 1.0;
    const double budget = static_cast<double>(kPromptTokenBudget);
    return std::max(0.0, 1.0 - (static_cast<double>(token_count) - budget) / budget);
}

double length_reward(const VisualPrompt& prompt) { return length_reward(prompt.token_count()); }

std::vector<double> group_advantages(std::span<const double> rewards) {
    if (rewards.empty()) return {};
    double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
    std::vector<double> out;
    out.reserve(rewards.size());
    for (double r : rewards) out.push_back(r - mean);
    return out;
}

// --- similarity via backend -----------------------------------------------------

SimilarityScorer::SimilarityScorer(std::shared_ptr<EmbeddingBackend> backend, double clip_scale)
    : backend_(std::move(backend)), clip_scale_(clip_scale) {
    if (!backend_) throw Error(ErrorCode::InvalidArgument, "similarity scorer needs an embedding backend");
    if (!(clip_scale_ > 0.0)) throw Error(ErrorCode::Config, "clip scale must be positive");
}

double SimilarityScorer::clip_score(const ImageArtifact& image, const VisualPrompt& prompt) const {
    auto img = backend_->embed(image, Granularity::Sequence);
    auto txt = backend_->embed(prompt.text(), Granularity::Sequence);
    return clip_score_from_embeddings(img, txt, clip_scale_);
}

BertScore SimilarityScorer::bert_score_for(std::string_view reference, std::string_view candidate) const {
    auto ref = backend_->embed(std::string(reference), Granularity::PerToken);
    auto cand = backend_->embed(std::string(candidate), Granularity::PerToken);
    return bert_score(ref, cand);
}

Similarity SimilarityScorer::bert_similarity(std::string_view reference, std::string_view candidate) const {
    if (trim(reference).empty() || trim(candidate).empty())
        throw Error(ErrorCode::InvalidArgument, "bert_similarity needs two non-empty texts");
    if (backend_->supports_per_token()) return {bert_score_for(reference, candidate).f1, false};
    auto ref = backend_->embed(std::string(reference), Granularity::Sequence);
    auto cand = backend_->embed(std::string(candidate), Granularity::Sequence);
    return {std::clamp(cosine_similarity(ref.values(), cand.values()), 0.0, 1.0), true};
}

// --- keys -----------------------------------------------------------------------

CompletionKey make_completion_key(const Metaphor& metaphor, const Decomposition& d, const VisualPrompt& prompt,
                                  const GenerationParams& params) {
    json canonical = json::array({metaphor.id(), d.source(), d.target(), d.meaning(), prompt.text(), to_json(params)});
    return CompletionKey{sha256_hex(canonical.dump())};
}

} // namespace mforge
