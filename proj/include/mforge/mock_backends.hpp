// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>

#include "mforge/backends.hpp"

// Deterministic stand-ins for the four model roles. Every output is a pure
// function of (inputs, seed): equal arguments give byte-identical results.
namespace mforge {

/// Shared toggles: availability (probe + calls) and call counters.
class MockControl {
public:
    void set_available(bool up) { available_ = up; }
    bool available() const { return available_; }
    std::size_t calls() const { return calls_; }

protected:
    /// Counts the call; throws Error{Transport} when scripted down.
    void admit(const char* role);

private:
    std::atomic<bool> available_{true};
    std::atomic<std::size_t> calls_{0};
};

/// Recognizes every template in prompts.hpp and answers in its schema.
/// Unrecognized requests get an S-T-M completion built from the text.
class MockChatBackend : public ChatBackend, public MockControl {
public:
    explicit MockChatBackend(std::uint64_t seed = 0) : seed_(seed) {}

    std::string complete(std::string_view system, std::span<const ChatMessage> messages) override;
    bool probe() override { return available(); }

    /// Calls that carried at least one image (VLM analyses).
    std::size_t image_calls() const { return image_calls_; }

private:
    std::uint64_t seed_;
    std::atomic<std::size_t> image_calls_{0};
};

/// Emits a PNG of the requested size whose pixels are seeded by
/// (prompt, params). The prompt is stored in a tEXt chunk so the mock
/// embedding backend can relate image and text.
class MockImageBackend : public ImageBackend, public MockControl {
public:
    explicit MockImageBackend(std::uint64_t seed = 0) : seed_(seed) {}

    ImageArtifact generate(const VisualPrompt& prompt, const GenerationParams& params) override;
    bool probe() override { return available(); }

private:
    std::uint64_t seed_;
};

/// Hash embeddings. Each token maps to a unit vector mixing a shared
/// component (weight `anisotropy`) with a token-specific random direction,
/// so unrelated tokens still score around anisotropy^2 like contextual
/// encoders do. Images embed near the text stored in their tEXt chunk.
class MockEmbeddingBackend : public EmbeddingBackend, public MockControl {
public:
    explicit MockEmbeddingBackend(std::size_t dimension = 64, bool per_token = true, double anisotropy = 0.75);

    EmbeddingVector embed(const EmbedContent& content, Granularity granularity) override;
    bool supports_per_token() const override { return per_token_; }
    bool probe() override { return available(); }

    std::vector<double> token_vector(std::string_view token) const;
    std::vector<double> text_vector(std::string_view text) const;

private:
    std::size_t dimension_;
    bool per_token_;
    double anisotropy_;
    std::vector<double> common_;
};

/// All four roles backed by mocks sharing one seed.
BackendSet make_mock_backends(std::uint64_t seed = 0);

} // namespace mforge
