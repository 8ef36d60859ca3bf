// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/prompts.hpp"

#include <fmt/format.h>

namespace mforge::prompts {

namespace {

constexpr std::string_view kDecompositionTemplate = R"~~(Analyze the following metaphor: "{metaphor}"

Your task is to:
1. Identify the Source (S), Target (T), and Meaning (M) of the metaphor
2. Generate a detailed visual prompt for an image generation model

Instructions:
- S should be the concrete concept used to explain T
- T should be the abstract concept being explained  
- M should be the intended connection or interpretation
- The visual prompt must create a scene that visually represents how T is like S, embodying M
- The visual prompt should be rich in visual details, atmosphere, and composition
- The visual prompt MUST be 77 tokens or less

Please format your response using the following tags:
<reasoning>Your analysis of the metaphor</reasoning>
<source>The concrete source concept</source>
<target>The abstract target concept</target>
<intended_meaning>The metaphorical connection</intended_meaning>
<visual_prompt>A detailed visual description for image generation (<77 tokens)</visual_prompt>)~~";

constexpr std::string_view kDecompositionScoreTemplate = R"~~(
You are an expert in linguistics and semantics. Evaluate the following decomposition of a metaphor.
Original Metaphor: "{metaphor}"

Decomposition:
- Source (S): "{s}"
- Target (T): "{t}"
- Meaning (M): "{m}"

Critique this decomposition. Does 'S' correctly identify the concrete concept? Does 'T' correctly identify the abstract concept? Does 'M' accurately capture the intended connection?

Provide a single score from 0.0 (completely wrong) to 1.0 (perfectly accurate) representing the quality of this decomposition.
Respond using XML-style tags. Put the score inside <decomposition_score> tags and the explanation inside <explanation> tags.

Example:
<decomposition_score>0.8</decomposition_score>
<explanation>The decomposition is mostly correct, but the meaning could be more precise.</explanation>
)~~";

constexpr std::string_view kAnalysisTagsTemplate =
    "You are an expert art critic. Your task is to analyze an image generated to visualize a metaphor. "
    "The original metaphor is: '{metaphor}'.\n"
    "The intended breakdown was:\n"
    "- Source (S): '{s}' (the concrete element)\n"
    "- Target (T): '{t}' (the abstract concept)\n"
    "- Meaning (M): '{m}' (the intended connection)\n\n"
    "Critically analyze the provided image based on this context. Be strict.\n"
    "1. Perceived Source (S'): What is the primary visual element in the image that represents '{s}'?\n"
    "2. Perceived Target (T'): What visual elements, if any, symbolize or evoke the abstract concept of '{t}'? If "
    "the image ONLY shows '{s}' without any clear visual link to '{t}', state that the target is not represented.\n"
    "3. Perceived Meaning (M'): What is the overall meaning the image conveys?\n"
    "4. S Presence Score: How clearly is '{s}' depicted? (0.0 for not present, 1.0 for clearly present).\n"
    "5. T Presence Score: How effectively does the image use the visuals of S to symbolize or evoke T? A score of "
    "0.1 should be given if the image only shows S without any metaphorical connection to T. A high score requires "
    "clear symbolic elements (e.g., color, composition, atmosphere) that represent T. Be critical.\n"
    "6. Meaning Alignment Score: Based on your analysis, how well does the Perceived Meaning (M') align with the "
    "original intended Meaning (M)? Provide a score from 0.0 (no alignment) to 1.0 (perfect alignment).\n\n"
    "Respond using XML-style tags. Put each answer inside its own tag. Example:\n"
    "<s_prime>A large, ancient tree.</s_prime>\n"
    "<t_prime>The concept of 'wisdom' is evoked by the tree's gnarled branches and deep roots.</t_prime>\n"
    "<m_prime>The image suggests that wisdom is something that grows over a long time and is deeply "
    "rooted.</m_prime>\n"
    "<s_presence_score>0.9</s_presence_score>\n"
    "<t_presence_score>0.7</t_presence_score>\n"
    "<meaning_alignment_score>0.8</meaning_alignment_score>";

constexpr std::string_view kAnalysisJsonTemplate = R"~~(
You are an expert art critic. Your task is to analyze an image generated to visualize a metaphor.
The original metaphor is: '{metaphor}'.
The intended breakdown was:
- Source (S): '{s}' (the concrete element)
- Target (T): '{t}' (the abstract concept)
- Meaning (M): '{m}' (the intended connection)

Critically analyze the provided image based on this context. Be strict.
1.  **Perceived Source (S')**: What is the primary visual element in the image that represents '{s}'?
2.  **Perceived Target (T')**: What visual elements, if any, symbolize or evoke the abstract concept of '{t}'? If the image ONLY shows '{s}' without any clear visual link to '{t}', state that the target is not represented.
3.  **Perceived Meaning (M')**: What is the overall meaning the image conveys?
4.  **S Presence Score**: How clearly is '{s}' depicted? (0.0 for not present, 1.0 for clearly present).
5.  **T Presence Score**: How effectively does the image use the visuals of S to symbolize or evoke T? A score of 0.1 should be given if the image only shows S without any metaphorical connection to T. A high score requires clear symbolic elements (e.g., color, composition, atmosphere) that represent T. Be critical.
6.  **Meaning Alignment Score**: Based on your analysis, how well does the Perceived Meaning (M') align with the original intended Meaning (M)? Provide a score from 0.0 (no alignment) to 1.0 (perfect alignment).

Respond with a JSON object with keys 's_prime', 't_prime', 'm_prime', 's_presence_score', 't_presence_score', and 'meaning_alignment_score'.
)~~";

constexpr std::string_view kNoStmTemplate = R"~~(
You are an expert art critic. Your task is to analyze an image generated to visualize a metaphor.
The original metaphor is: '{metaphor}'.

Critically analyze how well the provided image visually represents this metaphor.
1.  **Visual Description**: Briefly describe the main elements and style of the image.
2.  **Metaphorical Alignment**: How well does the image capture the essence and meaning of the metaphor?
3.  **Alignment Score**: Provide a single score from 0.0 (no connection) to 1.0 (perfectly represents the metaphor) for how well the image visualizes the metaphor.

Respond with a JSON object with keys 'visual_description', 'metaphorical_alignment', and 'alignment_score'.
)~~";

constexpr std::string_view kDecompositionFeedbackTemplate = R"~~(
Decomposition Quality Score: {decomposition_quality}
- This score reflects how well the original S, T, M breakdown captures the metaphor's meaning.
- A low score suggests the decomposition might be inaccurate or incomplete.
)~~";

constexpr std::string_view kRefinementTemplate = R"~~(Original Metaphor: "{original_metaphor}"
  - Source (S): {s}
  - Target (T): {t}
  - Meaning (M): {m}

{decomposition_feedback}

Current Image Generation Prompt: "{current_prompt}"

Evaluation Feedback:
Overall Reward: {reward}
Individual Scores:
{scores_summary}

Perceived by VLM from the last generated image:
  - Perceived Source (S'): {s_prime}
  - Perceived Target (T'): {t_prime}
  - Perceived Meaning (M'): {m_prime}

Task: Based on this feedback, suggest a revised image generation prompt. 
The new prompt should aim to:
1. Better represent the original Source (S), Target (T), and Meaning (M) in the image.
2. Address any weaknesses indicated by the scores (e.g., if S' is different from S, or if M' misaligns with M).
3. If the decomposition quality is low, focus on the most reliable aspects of the S, T, M breakdown.

Provide *only* the new, revised image generation prompt as a single string. Do not include any other explanatory text or labels, and the prompt MUST be 77 tokens or less.
)~~";

std::map<std::string, std::string> stm_values(std::string_view metaphor, const Decomposition& d) {
    return {{"metaphor", std::string(metaphor)}, {"s", d.source()}, {"t", d.target()}, {"m", d.meaning()}};
}

} // namespace

const std::string_view kExampleUser = R"~~(Analyze the following metaphor: "Ideas are diamonds.")~~";

const std::string_view kExampleAssistant =
    R"~~(<reasoning>The metaphor "Ideas are diamonds" equates ideas with diamonds, suggesting that ideas, like diamonds, are rare, valuable, and formed under pressure. They are initially rough but can be polished to become brilliant and precious.</reasoning>
    <source>Diamonds</source>
    <target>Ideas</target>
    <intended_meaning>Ideas are valuable, rare, and can be refined to brilliance.</intended_meaning>
    <visual_prompt>A brilliant, multifaceted diamond glowing on a dark, velvet cushion. Inside the diamond, intricate neural networks and glowing synapses pulse with light, representing the birth of a powerful idea. The background is dark and abstract, focusing all attention on the diamond's inner light. Cinematic, dramatic lighting.</visual_prompt>)~~";

const std::string_view kCorrectiveSuffixPlain =
    "\n\nYour previous reply was empty. Reply with the revised image generation prompt only.";

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size() + 256);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

std::string decomposition_request(std::string_view metaphor) {
    return render(kDecompositionTemplate, {{"metaphor", std::string(metaphor)}});
}

std::vector<ChatMessage> decomposition_messages(std::string_view metaphor) {
    return {
        ChatMessage{"user", std::string(kExampleUser), {}},
        ChatMessage{"assistant", std::string(kExampleAssistant), {}},
        ChatMessage{"user", decomposition_request(metaphor), {}},
    };
}

std::string decomposition_score_request(std::string_view metaphor, const Decomposition& d) {
    return render(kDecompositionScoreTemplate, stm_values(metaphor, d));
}

std::string analysis_request_tags(std::string_view metaphor, const Decomposition& d) {
    return render(kAnalysisTagsTemplate, stm_values(metaphor, d));
}

std::string analysis_request_json(std::string_view metaphor, const Decomposition& d) {
    return render(kAnalysisJsonTemplate, stm_values(metaphor, d));
}

std::string analysis_request_without_stm(std::string_view metaphor) {
    return render(kNoStmTemplate, {{"metaphor", std::string(metaphor)}});
}

std::string refinement_request(const RefinementContext& ctx) {
    std::string feedback = render(kDecompositionFeedbackTemplate,
                                  {{"decomposition_quality", fmt::format("{:.4f}", ctx.decomposition_quality)}});
    return render(kRefinementTemplate,
                  {
                      {"original_metaphor", ctx.metaphor},
                      {"s", ctx.source},
                      {"t", ctx.target},
                      {"m", ctx.meaning},
                      {"decomposition_feedback", feedback},
                      {"current_prompt", ctx.current_prompt},
                      {"reward", fmt::format("{:.4f}", ctx.reward)},
                      {"scores_summary", ctx.scores_summary},
                      {"s_prime", ctx.s_prime.empty() ? "Not identified" : ctx.s_prime},
                      {"t_prime", ctx.t_prime.empty() ? "Not identified" : ctx.t_prime},
                      {"m_prime", ctx.m_prime.empty() ? "Not interpreted" : ctx.m_prime},
                  });
}

std::string corrective_suffix(std::span<const std::string_view> expected_tags) {
    std::string tags;
    for (auto t : expected_tags) tags += fmt::format(" <{0}>...</{0}>", t);
    return "\n\nYour previous reply could not be parsed. Respond again and include every one of these tags, each "
           "opened and closed exactly once:" +
           tags;
}

std::string corrective_suffix_json(std::span<const std::string_view> expected_keys) {
    std::string keys;
    for (auto k : expected_keys) keys += fmt::format(" '{}'", k);
    return "\n\nYour previous reply could not be parsed. Respond again with a single valid JSON object containing "
           "the keys:" +
           keys;
}

} // namespace mforge::prompts
