// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/model.hpp"

#include <cmath>
#include <sstream>

#include "mforge/errors.hpp"
#include "mforge/hashing.hpp"

namespace mforge {

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
}

std::string require_nonblank(std::string_view value, const char* field) {
    std::string t = trim(value);
    if (t.empty()) throw Error(ErrorCode::InvalidArgument, std::string(field) + " must be non-empty", field);
    return t;
}

} // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (is_word_byte(c)) {
            current.push_back(ch);
            continue;
        }
        if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
        if (!is_space(c)) tokens.emplace_back(1, ch);
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::size_t count_tokens(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (is_word_byte(c)) {
            if (!in_word) ++n;
            in_word = true;
        } else {
            in_word = false;
            if (!is_space(c)) ++n;
        }
    }
    return n;
}

const TokenCounter& default_token_counter() {
    static const TokenCounter counter = [](std::string_view t) { return count_tokens(t); };
    return counter;
}

// --- Metaphor ---------------------------------------------------------------

std::string metaphor_id_for(std::string_view trimmed_text) {
    return "m-" + sha256_hex(trimmed_text).substr(0, 12);
}

Metaphor::Metaphor(std::string id, std::string_view text, std::optional<std::string> category)
    : text_(trim(text)), category_(std::move(category)) {
    if (text_.empty()) throw Error(ErrorCode::EmptyMetaphor, "metaphor text is empty after trimming");
    id_ = trim(id);
    if (id_.empty()) id_ = metaphor_id_for(text_);
    if (category_ && trim(*category_).empty()) category_.reset();
}

std::size_t Metaphor::word_count() const {
    std::istringstream in(text_);
    std::size_t n = 0;
    std::string w;
    while (in >> w) ++n;
    return n;
}

Metaphor validate_metaphor(std::string_view raw) { return Metaphor({}, raw); }

// --- Decomposition ------------------------------------------------------------

Decomposition::Decomposition(std::string_view source, std::string_view target, std::string_view meaning,
                             std::string_view reasoning)
    : source_(require_nonblank(source, "source")),
      target_(require_nonblank(target, "target")),
      meaning_(require_nonblank(meaning, "meaning")),
      reasoning_(trim(reasoning)) {}

// --- VisualPrompt -------------------------------------------------------------

VisualPrompt::VisualPrompt(std::string text, PromptOrigin origin, const TokenCounter& counter)
    : text_(std::move(text)), token_count_(counter(text_)), origin_(origin) {
    if (origin_.refined_iteration && *origin_.refined_iteration < 0)
        throw Error(ErrorCode::InvalidArgument, "refined iteration index must be non-negative");
}

// --- GenerationParams ---------------------------------------------------------

GenerationParams::GenerationParams(double guidance_scale, int inference_steps, int width, int height,
                                   std::optional<std::uint64_t> seed)
    : guidance_scale_(guidance_scale),
      inference_steps_(inference_steps),
      width_(width),
      height_(height),
      seed_(seed) {
    if (!(guidance_scale > 0.0) || !std::isfinite(guidance_scale))
        throw Error(ErrorCode::InvalidArgument, "guidance_scale must be positive", "guidance_scale");
    if (inference_steps <= 0) throw Error(ErrorCode::InvalidArgument, "inference_steps must be positive", "inference_steps");
    if (width <= 0) throw Error(ErrorCode::InvalidArgument, "width must be positive", "width");
    if (height <= 0) throw Error(ErrorCode::InvalidArgument, "height must be positive", "height");
}

GenerationParams GenerationParams::turbo() { return {4.5, 8, 768, 768}; }
GenerationParams GenerationParams::quality() { return {1.5, 20, 1024, 1024}; }

GenerationParams GenerationParams::with_seed(std::optional<std::uint64_t> seed) const {
    GenerationParams copy = *this;
    copy.seed_ = seed;
    return copy;
}

json to_json(const GenerationParams& p) {
    json j = {{"guidance_scale", p.guidance_scale()},
              {"inference_steps", p.inference_steps()},
              {"width", p.width()},
              {"height", p.height()}};
    j["seed"] = p.seed() ? json(*p.seed()) : json(nullptr);
    return j;
}

GenerationParams generation_params_from_json(const json& j) {
    try {
        std::optional<std::uint64_t> seed;
        if (j.contains("seed") && !j["seed"].is_null()) seed = j["seed"].get<std::uint64_t>();
        return GenerationParams(j.at("guidance_scale").get<double>(), j.at("inference_steps").get<int>(),
                                j.at("width").get<int>(), j.at("height").get<int>(), seed);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad generation params: ") + e.what());
    }
}

// --- ImageArtifact ------------------------------------------------------------

ImageArtifact::ImageArtifact(std::vector<std::uint8_t> bytes, GenerationParams params, std::string prompt_text)
    : params_(std::move(params)), prompt_text_(std::move(prompt_text)) {
    if (bytes.empty()) throw Error(ErrorCode::InvalidArgument, "image payload is empty", "bytes");
    content_hash_ = sha256_hex(bytes);
    bytes_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(bytes));
}

json to_json(const Metaphor& m) {
    json j = {{"id", m.id()}, {"text", m.text()}};
    j["category"] = m.category() ? json(*m.category()) : json(nullptr);
    return j;
}

json to_json(const Decomposition& d) {
    return {{"source", d.source()}, {"target", d.target()}, {"meaning", d.meaning()}, {"reasoning", d.reasoning()}};
}

json to_json(const VisualPrompt& p) {
    json j = {{"text", p.text()}, {"token_count", p.token_count()}, {"over_budget", p.over_budget()}};
    j["origin"] = p.origin().is_initial() ? json("initial") : json({{"refined", *p.origin().refined_iteration}});
    return j;
}

} // namespace mforge
