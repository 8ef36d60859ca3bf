// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/judge.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "mforge/errors.hpp"
#include "mforge/prompts.hpp"
#include "mforge/reask.hpp"
#include "mforge/tag_parser.hpp"

namespace mforge {

namespace {

void check_unit(double v, const char* field) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw Error(ErrorCode::InvalidArgument, std::string(field) + " must lie in [0, 1]", field);
}

/// Blank perceived strings become the refinement template's absence phrases.
std::string perceived_or_absent(std::string value, const char* field, const char* absent, std::set<std::string>& flags) {
    value = trim(value);
    if (!value.empty()) return value;
    flags.insert(std::string("empty:") + field);
    return absent;
}

double take_score(const std::string& text, const char* field, std::set<std::string>& flags) {
    auto s = clamp_unit(parse_score(text, field));
    if (s.clamped) flags.insert(std::string("clamped:") + field);
    return s.value;
}

std::string json_text(const json& obj, const char* key) {
    if (!obj.contains(key)) throw Error(ErrorCode::MissingKey, std::string("reply lacks key '") + key + "'", key);
    const auto& v = obj[key];
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return {};
    return v.dump();
}

std::string json_score_text(const json& obj, const char* key) {
    if (!obj.contains(key)) throw Error(ErrorCode::MissingKey, std::string("reply lacks key '") + key + "'", key);
    const auto& v = obj[key];
    if (v.is_number()) return v.dump();
    if (v.is_string()) return v.get<std::string>();
    throw Error(ErrorCode::UnparsableScore, std::string("key '") + key + "' is not numeric", key);
}

VlmAnalysis build_analysis(std::string s_prime, std::string t_prime, std::string m_prime, const std::string& s_score,
                           const std::string& t_score, const std::string& m_score) {
    std::set<std::string> flags;
    double s = take_score(s_score, "s_presence_score", flags);
    double t = take_score(t_score, "t_presence_score", flags);
    double m = take_score(m_score, "meaning_alignment_score", flags);
    // Sequenced so every flag lands before the set is moved.
    std::string sp = perceived_or_absent(std::move(s_prime), "s_prime", "Not identified", flags);
    std::string tp = perceived_or_absent(std::move(t_prime), "t_prime", "Not identified", flags);
    std::string mp = perceived_or_absent(std::move(m_prime), "m_prime", "Not interpreted", flags);
    return VlmAnalysis(std::move(sp), std::move(tp), std::move(mp), s, t, m, std::move(flags));
}

} // namespace

VlmAnalysis::VlmAnalysis(std::string s_prime, std::string t_prime, std::string m_prime, double s_presence,
                         double t_presence, double m_align, std::set<std::string> flags)
    : s_prime_(std::move(s_prime)),
      t_prime_(std::move(t_prime)),
      m_prime_(std::move(m_prime)),
      s_presence_(s_presence),
      t_presence_(t_presence),
      m_align_(m_align),
      flags_(std::move(flags)) {
    check_unit(s_presence_, "s_presence");
    check_unit(t_presence_, "t_presence");
    check_unit(m_align_, "m_align");
    if (trim(s_prime_).empty() || trim(t_prime_).empty() || trim(m_prime_).empty())
        throw Error(ErrorCode::InvalidArgument, "perceived S'/T'/M' must be non-empty");
}

json to_json(const VlmAnalysis& a) {
    return {{"s_prime", a.s_prime()},       {"t_prime", a.t_prime()},       {"m_prime", a.m_prime()},
            {"s_presence", a.s_presence()}, {"t_presence", a.t_presence()}, {"m_align", a.m_align()},
            {"flags", a.flags()}};
}

VlmAnalysis vlm_analysis_from_json(const json& j) {
    try {
        return VlmAnalysis(j.at("s_prime").get<std::string>(), j.at("t_prime").get<std::string>(),
                           j.at("m_prime").get<std::string>(), j.at("s_presence").get<double>(),
                           j.at("t_presence").get<double>(), j.at("m_align").get<double>(),
                           j.value("flags", std::set<std::string>{}));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad analysis record: ") + e.what());
    }
}

NoStmAnalysis::NoStmAnalysis(std::string visual_description, std::string metaphorical_alignment,
                             double alignment_score, bool clamped)
    : visual_description_(std::move(visual_description)),
      metaphorical_alignment_(std::move(metaphorical_alignment)),
      alignment_score_(alignment_score),
      clamped_(clamped) {
    check_unit(alignment_score_, "alignment_score");
}

VlmAnalysis parse_analysis_tags(std::string_view raw) {
    TagMap t = parse_tagged(raw, prompts::kAnalysisTags);
    return build_analysis(t["s_prime"], t["t_prime"], t["m_prime"], t["s_presence_score"], t["t_presence_score"],
                          t["meaning_alignment_score"]);
}

VlmAnalysis parse_analysis_json(std::string_view raw) {
    json obj = extract_first_json_object(raw);
    return build_analysis(json_text(obj, "s_prime"), json_text(obj, "t_prime"), json_text(obj, "m_prime"),
                          json_score_text(obj, "s_presence_score"), json_score_text(obj, "t_presence_score"),
                          json_score_text(obj, "meaning_alignment_score"));
}

NoStmAnalysis parse_no_stm_analysis(std::string_view raw) {
    json obj = extract_first_json_object(raw);
    std::string description = json_text(obj, "visual_description");
    std::string alignment = json_text(obj, "metaphorical_alignment");
    auto score = clamp_unit(parse_score(json_score_text(obj, "alignment_score"), "alignment_score"));
    return NoStmAnalysis(std::move(description), std::move(alignment), score.value, score.clamped);
}

Judge::Judge(std::shared_ptr<ChatBackend> vlm) : vlm_(std::move(vlm)) {
    if (!vlm_) throw Error(ErrorCode::InvalidArgument, "judge needs a VLM backend");
}

VlmAnalysis Judge::analyze_with_stm(const ImageArtifact& image, const Metaphor& metaphor, const Decomposition& d,
                                    AnalysisDialect dialect) const {
    const bool tags = dialect == AnalysisDialect::Tags;
    spdlog::debug("analysis of {} in {} dialect", metaphor.id(), tags ? "tag" : "json");
    std::vector<ChatMessage> messages{
        {"user",
         tags ? prompts::analysis_request_tags(metaphor.text(), d) : prompts::analysis_request_json(metaphor.text(), d),
         {image}}};
    std::string corrective =
        tags ? prompts::corrective_suffix(prompts::kAnalysisTags) : prompts::corrective_suffix_json(prompts::kAnalysisTags);
    return ask_with_reask<VlmAnalysis>(*vlm_, {}, std::move(messages), corrective, [tags](const std::string& raw) {
        return tags ? parse_analysis_tags(raw) : parse_analysis_json(raw);
    });
}

NoStmAnalysis Judge::analyze_without_stm(const ImageArtifact& image, const Metaphor& metaphor) const {
    std::vector<ChatMessage> messages{{"user", prompts::analysis_request_without_stm(metaphor.text()), {image}}};
    return ask_with_reask<NoStmAnalysis>(*vlm_, {}, std::move(messages), prompts::corrective_suffix_json(prompts::kNoStmKeys),
                                         [](const std::string& raw) { return parse_no_stm_analysis(raw); });
}

} // namespace mforge
