// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mforge/backends.hpp"
#include "mforge/model.hpp"

// Prompt templates for every model call the pipeline makes. The wording is
// reproduced character for character, including stray trailing spaces;
// downstream parsers and the mock backends key off it.
namespace mforge::prompts {

/// Replaces `{name}` placeholders in a single pass; unknown braces are kept.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values);

// --- S-T-M decomposition + visual prompt ---------------------------------------

inline constexpr std::string_view kDecompositionTags[] = {"reasoning", "source", "target", "intended_meaning",
                                                          "visual_prompt"};

extern const std::string_view kExampleUser;
extern const std::string_view kExampleAssistant;

std::string decomposition_request(std::string_view metaphor);
/// One-shot exemplar pair followed by the request.
std::vector<ChatMessage> decomposition_messages(std::string_view metaphor);

// --- Decomposition quality judge ----------------------------------------------

inline constexpr std::string_view kDecompositionScoreTags[] = {"decomposition_score", "explanation"};

std::string decomposition_score_request(std::string_view metaphor, const Decomposition& d);

// --- Image analysis -------------------------------------------------------------

inline constexpr std::string_view kAnalysisTags[] = {"s_prime",          "t_prime",          "m_prime",
                                                     "s_presence_score", "t_presence_score", "meaning_alignment_score"};
inline constexpr std::string_view kNoStmKeys[] = {"visual_description", "metaphorical_alignment", "alignment_score"};

/// Tag-dialect analysis prompt used inside the refinement and reward loops.
std::string analysis_request_tags(std::string_view metaphor, const Decomposition& d);
/// JSON-dialect analysis prompt (same questions, JSON keys).
std::string analysis_request_json(std::string_view metaphor, const Decomposition& d);
/// Analysis prompt for generators that emit no S-T-M text.
std::string analysis_request_without_stm(std::string_view metaphor);

// --- Refinement -----------------------------------------------------------------

struct RefinementContext {
    std::string metaphor;
    std::string source;
    std::string target;
    std::string meaning;
    double decomposition_quality = 0.0;
    std::string current_prompt;
    double reward = 0.0;
    std::string scores_summary;
    std::string s_prime;  ///< empty renders as "Not identified"
    std::string t_prime;  ///< empty renders as "Not identified"
    std::string m_prime;  ///< empty renders as "Not interpreted"
};

std::string refinement_request(const RefinementContext& ctx);

/// Appended to the original request when a reply could not be parsed.
std::string corrective_suffix(std::span<const std::string_view> expected_tags);
std::string corrective_suffix_json(std::span<const std::string_view> expected_keys);
extern const std::string_view kCorrectiveSuffixPlain;

/// Phrases that identify each template; the mock chat backend dispatches on them.
namespace markers {
inline constexpr std::string_view kDecomposition = "Analyze the following metaphor: \"";
inline constexpr std::string_view kDecompositionScore = "Evaluate the following decomposition of a metaphor.";
inline constexpr std::string_view kAnalysisTags = "Respond using XML-style tags. Put each answer inside its own tag.";
inline constexpr std::string_view kAnalysisJson = "Respond with a JSON object with keys 's_prime'";
inline constexpr std::string_view kAnalysisNoStm = "Respond with a JSON object with keys 'visual_description'";
inline constexpr std::string_view kRefinement = "suggest a revised image generation prompt";
} // namespace markers

} // namespace mforge::prompts
