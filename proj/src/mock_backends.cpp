// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/mock_backends.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include <fmt/format.h>

#include "mforge/errors.hpp"
#include "mforge/hashing.hpp"
#include "mforge/png.hpp"
#include "mforge/prompts.hpp"
#include "mforge/tag_parser.hpp"

namespace mforge {

namespace {

template <std::size_t N>
std::string_view pick(SplitMix64& rng, const std::array<std::string_view, N>& options) {
    return options[rng.index(N)];
}

double score2(SplitMix64& rng, double lo, double hi) { return std::round(rng.uniform(lo, hi) * 100.0) / 100.0; }

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

std::string strip_article(std::string s) {
    for (std::string_view article : {"a ", "an ", "the ", "A ", "An ", "The "}) {
        if (s.rfind(article, 0) == 0) return s.substr(article.size());
    }
    return s;
}

std::string between(std::string_view text, std::string_view open, std::string_view close) {
    auto b = text.find(open);
    if (b == std::string_view::npos) return {};
    b += open.size();
    auto e = text.find(close, b);
    if (e == std::string_view::npos) return {};
    return std::string(text.substr(b, e - b));
}

struct Stm {
    std::string source;
    std::string target;
    std::string meaning;
};

/// "X is Y" style split; falls back to last word as source.
Stm guess_stm(std::string_view metaphor, SplitMix64& rng) {
    std::string m = trim(metaphor);
    while (!m.empty() && std::ispunct(static_cast<unsigned char>(m.back()))) m.pop_back();
    std::string lm = lower(m);
    std::string target;
    std::string source;
    for (std::string_view cop : {" is ", " are ", " was ", " were ", " am ", " becomes ", " like "}) {
        auto p = lm.find(cop);
        if (p != std::string::npos) {
            target = trim(m.substr(0, p));
            source = trim(m.substr(p + cop.size()));
            break;
        }
    }
    if (source.empty() || target.empty()) {
        auto sp = m.rfind(' ');
        if (sp == std::string::npos) {
            source = m.empty() ? "an image" : m;
            target = "an idea";
        } else {
            source = m.substr(sp + 1);
            target = m.substr(0, sp);
        }
    }
    source = capitalize(strip_article(source));
    target = capitalize(target);
    static constexpr std::array<std::string_view, 4> kMeaning = {
        "{t} shares the defining qualities of {s}.",
        "{t} can be understood through the familiar nature of {s}.",
        "Like {s}, {t} must be nurtured, shaped and understood over time.",
        "{t} carries the weight, texture and character of {s}.",
    };
    std::string meaning = prompts::render(pick(rng, kMeaning), {{"t", target}, {"s", lower(source)}});
    return {source, target, meaning};
}

std::string visual_prompt_for(const std::string& source, const std::string& target, SplitMix64& rng) {
    static constexpr std::array<std::string_view, 5> kOpen = {"A luminous", "A surreal", "A detailed", "A quiet",
                                                              "A dramatic"};
    static constexpr std::array<std::string_view, 4> kVerb = {"that embodies", "shaped to evoke", "merging with",
                                                              "quietly symbolizing"};
    static constexpr std::array<std::string_view, 5> kDetail = {
        "soft volumetric light", "rich textures and deep shadows", "a misty painterly background",
        "warm golden-hour colors", "a minimalist dark backdrop"};
    static constexpr std::array<std::string_view, 4> kStyle = {"cinematic composition", "oil painting style",
                                                               "photorealistic detail", "dreamlike atmosphere"};
    return fmt::format("{} {} {} {}, {}, {}.", pick(rng, kOpen), lower(source), pick(rng, kVerb), lower(target),
                       pick(rng, kDetail), pick(rng, kStyle));
}

std::string decomposition_reply(std::string_view metaphor, SplitMix64& rng) {
    Stm stm = guess_stm(metaphor, rng);
    std::string reasoning = fmt::format(
        "The metaphor \"{}\" maps the concrete domain of {} onto the abstract idea of {}.", trim(metaphor),
        lower(stm.source), lower(stm.target));
    return fmt::format("<reasoning>{}</reasoning>\n<source>{}</source>\n<target>{}</target>\n"
                       "<intended_meaning>{}</intended_meaning>\n<visual_prompt>{}</visual_prompt>",
                       reasoning, stm.source, stm.target, stm.meaning,
                       visual_prompt_for(stm.source, stm.target, rng));
}

struct Analysis {
    std::string s_prime, t_prime, m_prime;
    double s = 0, t = 0, m = 0;
};

Analysis analyze(std::string_view request, SplitMix64& rng) {
    std::string s = between(request, "- Source (S): '", "' (the concrete element)");
    std::string t = between(request, "- Target (T): '", "' (the abstract concept)");
    std::string m = between(request, "- Meaning (M): '", "' (the intended connection)");
    Analysis a;
    a.s = score2(rng, 0.6, 1.0);
    a.t = score2(rng, 0.1, 0.9);
    a.m = score2(rng, 0.3, 0.95);
    a.s_prime = rng.uniform() < 0.75 ? fmt::format("A depiction of {}.", lower(s)) : "An abstract arrangement of shapes.";
    a.t_prime = a.t < 0.2 ? "The target is not represented."
                          : fmt::format("{} is evoked through color and composition.", t);
    if (a.m <= 0.6) {
        a.m_prime = "The image conveys a generic, literal scene.";
    } else if (rng.uniform() < 0.5) {
        a.m_prime = m;
    } else {
        a.m_prime = fmt::format("The picture suggests that {}", lower(m));
    }
    return a;
}

std::string refinement_reply(std::string_view request, SplitMix64& rng) {
    std::string s = trim(between(request, "  - Source (S): ", "\n"));
    std::string t = trim(between(request, "  - Target (T): ", "\n"));
    if (s.empty()) s = "an object";
    if (t.empty()) t = "an idea";
    return visual_prompt_for(s, t, rng);
}

std::string request_fingerprint(std::string_view system, std::span<const ChatMessage> messages, std::uint64_t seed) {
    std::string key = fmt::format("seed={}\x1f{}\x1f", seed, system);
    for (const auto& msg : messages) {
        key += msg.role;
        key += '\x1e';
        key += msg.text;
        for (const auto& img : msg.images) {
            key += '\x1d';
            key += img.content_hash();
        }
        key += '\x1f';
    }
    return key;
}

void normalize(std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0)
        for (double& x : v) x /= n;
}

std::vector<double> random_unit(std::uint64_t seed, std::size_t dim) {
    SplitMix64 rng(seed);
    std::vector<double> v(dim);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    normalize(v);
    return v;
}

} // namespace

void MockControl::admit(const char* role) {
    ++calls_;
    if (!available_) throw Error(ErrorCode::Transport, std::string("mock ") + role + " backend is down");
}

// --- chat -----------------------------------------------------------------------

std::string MockChatBackend::complete(std::string_view system, std::span<const ChatMessage> messages) {
    if (messages.empty()) throw Error(ErrorCode::InvalidArgument, "chat request needs at least one message");
    admit("chat");
    bool has_image = std::any_of(messages.begin(), messages.end(), [](const auto& m) { return !m.images.empty(); });
    if (has_image) ++image_calls_;

    SplitMix64 rng(sha256_u64(request_fingerprint(system, messages, seed_)));
    std::string_view last = messages.back().text;
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->role == "user") {
            last = it->text;
            break;
        }
    }
    namespace mk = prompts::markers;
    if (last.find(mk::kDecompositionScore) != std::string_view::npos) {
        double score = score2(rng, 0.55, 0.95);
        return fmt::format("<decomposition_score>{:.2f}</decomposition_score>\n<explanation>{}</explanation>", score,
                           score > 0.75 ? "The decomposition identifies the source and target correctly."
                                        : "The decomposition is plausible, but the meaning could be more precise.");
    }
    if (last.find(mk::kAnalysisTags) != std::string_view::npos) {
        Analysis a = analyze(last, rng);
        return serialize_tags({{"s_prime", a.s_prime},
                               {"t_prime", a.t_prime},
                               {"m_prime", a.m_prime},
                               {"s_presence_score", fmt::format("{:.2f}", a.s)},
                               {"t_presence_score", fmt::format("{:.2f}", a.t)},
                               {"meaning_alignment_score", fmt::format("{:.2f}", a.m)}});
    }
    if (last.find(mk::kAnalysisJson) != std::string_view::npos) {
        Analysis a = analyze(last, rng);
        nlohmann::json j = {{"s_prime", a.s_prime},          {"t_prime", a.t_prime},
                            {"m_prime", a.m_prime},          {"s_presence_score", a.s},
                            {"t_presence_score", a.t},       {"meaning_alignment_score", a.m}};
        return "```json\n" + j.dump(2) + "\n```";
    }
    if (last.find(mk::kAnalysisNoStm) != std::string_view::npos) {
        std::string metaphor = between(last, "The original metaphor is: '", "'.");
        double score = score2(rng, 0.3, 0.9);
        nlohmann::json j = {{"visual_description", "A stylized scene with a single central subject."},
                            {"metaphorical_alignment", fmt::format("The image partially conveys '{}'.", metaphor)},
                            {"alignment_score", score}};
        return j.dump();
    }
    if (last.find(mk::kRefinement) != std::string_view::npos) return refinement_reply(last, rng);
    if (last.find(mk::kDecomposition) != std::string_view::npos) {
        return decomposition_reply(between(last, mk::kDecomposition, "\""), rng);
    }
    return decomposition_reply(last, rng);
}

// --- image ----------------------------------------------------------------------

ImageArtifact MockImageBackend::generate(const VisualPrompt& prompt, const GenerationParams& params) {
    if (trim(prompt.text()).empty()) throw Error(ErrorCode::InvalidArgument, "prompt text is empty");
    admit("image");
    SplitMix64 rng(sha256_u64(fmt::format("seed={}\x1f{}\x1f{}", seed_, prompt.text(), to_json(params).dump())));
    const int w = params.width();
    const int h = params.height();
    std::array<std::uint8_t, 3> base{};
    std::array<std::uint8_t, 3> slope{};
    for (int c = 0; c < 3; ++c) {
        base[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(rng.next());
        slope[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(1 + rng.index(7));
    }
    const int band = 8 + static_cast<int>(rng.index(56));
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
    std::size_t i = 0;
    for (int y = 0; y < h; ++y) {
        const auto row_shift = static_cast<std::uint8_t>((y / band) * 37);
        for (int x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                rgb[i++] = static_cast<std::uint8_t>(base[c] + row_shift + (x * slope[c]) / 4);
            }
        }
    }
    auto bytes = png::encode_rgb(w, h, rgb, {{"prompt", prompt.text()}, {"Software", "mforge-mock"}});
    return ImageArtifact(std::move(bytes), params, prompt.text());
}

// --- embeddings -----------------------------------------------------------------

MockEmbeddingBackend::MockEmbeddingBackend(std::size_t dimension, bool per_token, double anisotropy)
    : dimension_(dimension), per_token_(per_token), anisotropy_(std::clamp(anisotropy, 0.0, 1.0)) {
    if (dimension_ == 0) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be positive");
    common_ = random_unit(sha256_u64("mforge-mock-common"), dimension_);
}

std::vector<double> MockEmbeddingBackend::token_vector(std::string_view token) const {
    auto specific = random_unit(sha256_u64("tok:" + lower(token)), dimension_);
    const double rest = std::sqrt(1.0 - anisotropy_ * anisotropy_);
    std::vector<double> v(dimension_);
    for (std::size_t i = 0; i < dimension_; ++i) v[i] = anisotropy_ * common_[i] + rest * specific[i];
    normalize(v);
    return v;
}

std::vector<double> MockEmbeddingBackend::text_vector(std::string_view text) const {
    auto tokens = split_tokens(text);
    if (tokens.empty()) return random_unit(sha256_u64("txt:" + std::string(text)), dimension_);
    std::vector<double> sum(dimension_, 0.0);
    for (const auto& tok : tokens) {
        auto v = token_vector(tok);
        for (std::size_t i = 0; i < dimension_; ++i) sum[i] += v[i];
    }
    normalize(sum);
    return sum;
}

EmbeddingVector MockEmbeddingBackend::embed(const EmbedContent& content, Granularity granularity) {
    if (const auto* text = std::get_if<std::string>(&content)) {
        if (trim(*text).empty()) throw Error(ErrorCode::InvalidArgument, "embedding payload is empty");
        admit("embed");
        if (granularity == Granularity::Sequence) return EmbeddingVector(Modality::Text, {text_vector(*text)});
        if (!per_token_) throw Error(ErrorCode::InvalidArgument, "per-token embeddings are disabled for this backend");
        auto tokens = split_tokens(*text);
        std::vector<std::vector<double>> rows;
        rows.reserve(tokens.size());
        for (const auto& t : tokens) rows.push_back(token_vector(t));
        return EmbeddingVector(Modality::Text, std::move(rows), std::move(tokens));
    }
    const auto& image = std::get<ImageArtifact>(content);
    admit("embed");
    if (granularity != Granularity::Sequence)
        throw Error(ErrorCode::InvalidArgument, "images only support sequence embeddings");
    auto noise = random_unit(sha256_u64("img:" + image.content_hash()), dimension_);
    auto caption = png::read_text(image.bytes(), "prompt");
    if (!caption || trim(*caption).empty()) return EmbeddingVector(Modality::Image, {noise});
    // cos(image, caption) is drawn from [0.20, 0.36], the scale real CLIP
    // cosines live on.
    const double align = 0.20 + 0.16 * SplitMix64(sha256_u64("align:" + image.content_hash())).uniform();
    const double rest = std::sqrt(1.0 - align * align);
    auto caption_vec = text_vector(*caption);
    // Noise is made orthogonal to the caption so the cosine is exactly `align`.
    double along = 0.0;
    for (std::size_t i = 0; i < dimension_; ++i) along += noise[i] * caption_vec[i];
    for (std::size_t i = 0; i < dimension_; ++i) noise[i] -= along * caption_vec[i];
    normalize(noise);
    std::vector<double> v(dimension_);
    for (std::size_t i = 0; i < dimension_; ++i) v[i] = align * caption_vec[i] + rest * noise[i];
    normalize(v);
    return EmbeddingVector(Modality::Image, {std::move(v)});
}

BackendSet make_mock_backends(std::uint64_t seed) {
    BackendSet set;
    set.llm = std::make_shared<MockChatBackend>(seed);
    set.image = std::make_shared<MockImageBackend>(seed);
    set.vlm = std::make_shared<MockChatBackend>(seed ^ 0x5eedULL);
    set.embed = std::make_shared<MockEmbeddingBackend>();
    return set;
}

} // namespace mforge
