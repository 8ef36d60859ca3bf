// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mforge/model.hpp"

namespace mforge {

enum class BackendRole { Llm, Image, Vlm, Embed };

std::string_view to_string(BackendRole role);
BackendRole backend_role_from_string(std::string_view name);

struct BackendConfig {
    std::string base_url;
    std::optional<std::string> api_key;
    std::string model_name;
    double timeout_s = 120.0;
    int max_retries = 3;
    double retry_backoff_s = 1.0;
    /// Concurrent in-flight requests allowed against this backend.
    int max_concurrency = 4;
    /// Sampling temperature; left to the server when unset.
    std::optional<double> temperature;
    /// Embedding backends only: whether per-token vectors are served.
    bool per_token_embeddings = true;

    /// Throws Error{Config} when timeout <= 0, retries outside [0, 10] or
    /// concurrency < 1.
    void validate() const;
};

// ---------------------------------------------------------------------------
// Chat (LLM and VLM roles)
// ---------------------------------------------------------------------------

struct ChatMessage {
    std::string role;  ///< "user" | "assistant" | "system"
    std::string text;
    std::vector<ImageArtifact> images;
};

class Backend {
public:
    virtual ~Backend() = default;
    /// Cheap reachability check used by the health endpoint.
    virtual bool probe() = 0;
};

class ChatBackend : public Backend {
public:
    /// Returns the assistant text exactly as produced. Throws
    /// Error{InvalidArgument} on an empty message list.
    virtual std::string complete(std::string_view system, std::span<const ChatMessage> messages) = 0;
};

class ImageBackend : public Backend {
public:
    virtual ImageArtifact generate(const VisualPrompt& prompt, const GenerationParams& params) = 0;
};

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

enum class Modality { Text, Image };
enum class Granularity { Sequence, PerToken };

/// One vector (Sequence) or one vector per token (PerToken, with the
/// token strings). Rows are validated for equal dimension and finiteness.
class EmbeddingVector {
public:
    EmbeddingVector(Modality modality, std::vector<std::vector<double>> rows,
                    std::vector<std::string> tokens = {});

    Modality modality() const noexcept { return modality_; }
    Granularity granularity() const noexcept { return tokens_.empty() ? Granularity::Sequence : Granularity::PerToken; }
    std::size_t dimension() const noexcept { return dimension_; }
    const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    /// Sequence vector; throws for per-token embeddings.
    std::span<const double> values() const;

private:
    Modality modality_;
    std::size_t dimension_ = 0;
    std::vector<std::vector<double>> rows_;
    std::vector<std::string> tokens_;
};

using EmbedContent = std::variant<std::string, ImageArtifact>;

class EmbeddingBackend : public Backend {
public:
    virtual EmbeddingVector embed(const EmbedContent& content, Granularity granularity) = 0;
    virtual bool supports_per_token() const = 0;
};

/// The four model roles the pipeline talks to. The decomposition judge
/// defaults to the VLM backend when `decomposition_judge` is null.
struct BackendSet {
    std::shared_ptr<ChatBackend> llm;
    std::shared_ptr<ImageBackend> image;
    std::shared_ptr<ChatBackend> vlm;
    std::shared_ptr<EmbeddingBackend> embed;
    std::shared_ptr<ChatBackend> decomposition_judge;

    std::shared_ptr<ChatBackend> judge_for_decomposition() const {
        return decomposition_judge ? decomposition_judge : vlm;
    }

    std::map<std::string, Backend*> probes() const;
};

} // namespace mforge
