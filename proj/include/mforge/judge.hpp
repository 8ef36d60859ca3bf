// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <set>
#include <string>

#include "mforge/backends.hpp"
#include "mforge/model.hpp"

namespace mforge {

/// What the VLM perceived in an image, and how well it matches S-T-M.
class VlmAnalysis {
public:
    /// Scores must lie in [0, 1]; perceived strings must be non-empty.
    VlmAnalysis(std::string s_prime, std::string t_prime, std::string m_prime, double s_presence, double t_presence,
                double m_align, std::set<std::string> flags = {});

    const std::string& s_prime() const noexcept { return s_prime_; }
    const std::string& t_prime() const noexcept { return t_prime_; }
    const std::string& m_prime() const noexcept { return m_prime_; }
    double s_presence() const noexcept { return s_presence_; }
    double t_presence() const noexcept { return t_presence_; }
    double m_align() const noexcept { return m_align_; }
    /// e.g. "clamped:t_presence_score", "empty:s_prime"
    const std::set<std::string>& flags() const noexcept { return flags_; }

private:
    std::string s_prime_, t_prime_, m_prime_;
    double s_presence_, t_presence_, m_align_;
    std::set<std::string> flags_;
};

json to_json(const VlmAnalysis& a);
VlmAnalysis vlm_analysis_from_json(const json& j);

class NoStmAnalysis {
public:
    NoStmAnalysis(std::string visual_description, std::string metaphorical_alignment, double alignment_score,
                  bool clamped = false);

    const std::string& visual_description() const noexcept { return visual_description_; }
    const std::string& metaphorical_alignment() const noexcept { return metaphorical_alignment_; }
    double alignment_score() const noexcept { return alignment_score_; }
    bool clamped() const noexcept { return clamped_; }

private:
    std::string visual_description_;
    std::string metaphorical_alignment_;
    double alignment_score_;
    bool clamped_;
};

/// Response format requested from the judge. Tags drive the pipeline;
/// JSON is used for evaluating externally generated images.
enum class AnalysisDialect { Tags, Json };

VlmAnalysis parse_analysis_tags(std::string_view raw);
/// Accepts numbers or numeric strings for the score keys.
VlmAnalysis parse_analysis_json(std::string_view raw);
NoStmAnalysis parse_no_stm_analysis(std::string_view raw);

class Judge {
public:
    explicit Judge(std::shared_ptr<ChatBackend> vlm);

    VlmAnalysis analyze_with_stm(const ImageArtifact& image, const Metaphor& metaphor, const Decomposition& d,
                                 AnalysisDialect dialect = AnalysisDialect::Tags) const;
    NoStmAnalysis analyze_without_stm(const ImageArtifact& image, const Metaphor& metaphor) const;

private:
    std::shared_ptr<ChatBackend> vlm_;
};

} // namespace mforge
