// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/backends.hpp"

#include <cmath>

#include "mforge/errors.hpp"

namespace mforge {

std::string_view to_string(BackendRole role) {
    switch (role) {
    case BackendRole::Llm: return "llm";
    case BackendRole::Image: return "image";
    case BackendRole::Vlm: return "vlm";
    case BackendRole::Embed: return "embed";
    }
    return "unknown";
}

BackendRole backend_role_from_string(std::string_view name) {
    if (name == "llm") return BackendRole::Llm;
    if (name == "image") return BackendRole::Image;
    if (name == "vlm") return BackendRole::Vlm;
    if (name == "embed") return BackendRole::Embed;
    throw Error(ErrorCode::Config, "unknown backend role '" + std::string(name) + "'");
}

void BackendConfig::validate() const {
    if (!(timeout_s > 0.0)) throw Error(ErrorCode::Config, "backend timeout must be > 0", "timeout");
    if (max_retries < 0 || max_retries > 10) throw Error(ErrorCode::Config, "max_retries must be in [0, 10]", "max_retries");
    if (retry_backoff_s < 0.0) throw Error(ErrorCode::Config, "retry_backoff must be >= 0", "retry_backoff");
    if (max_concurrency < 1) throw Error(ErrorCode::Config, "max_concurrency must be >= 1", "max_concurrency");
}

EmbeddingVector::EmbeddingVector(Modality modality, std::vector<std::vector<double>> rows,
                                 std::vector<std::string> tokens)
    : modality_(modality), rows_(std::move(rows)), tokens_(std::move(tokens)) {
    if (rows_.empty()) throw Error(ErrorCode::DimensionMismatch, "embedding has no vectors");
    if (!tokens_.empty() && tokens_.size() != rows_.size())
        throw Error(ErrorCode::DimensionMismatch, "token count does not match vector count");
    if (tokens_.empty() && rows_.size() != 1)
        throw Error(ErrorCode::DimensionMismatch, "sequence embedding must hold exactly one vector");
    dimension_ = rows_.front().size();
    if (dimension_ == 0) throw Error(ErrorCode::DimensionMismatch, "embedding dimension is zero");
    for (const auto& row : rows_) {
        if (row.size() != dimension_)
            throw Error(ErrorCode::DimensionMismatch, "inconsistent embedding dimensions within one response");
        for (double v : row) {
            if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "embedding contains non-finite values");
        }
    }
}

std::span<const double> EmbeddingVector::values() const {
    if (granularity() != Granularity::Sequence)
        throw Error(ErrorCode::InvalidArgument, "values() requires a sequence embedding");
    return rows_.front();
}

std::map<std::string, Backend*> BackendSet::probes() const {
    std::map<std::string, Backend*> out;
    out["llm"] = llm.get();
    out["image"] = image.get();
    out["vlm"] = vlm.get();
    out["embed"] = embed.get();
    if (decomposition_judge) out["decomposition_judge"] = decomposition_judge.get();
    return out;
}

} // namespace mforge
