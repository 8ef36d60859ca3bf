// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/errors.hpp"

namespace mforge {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyMetaphor: return "EmptyMetaphor";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::HttpStatus: return "HttpStatus";
    case ErrorCode::ExhaustedRetries: return "ExhaustedRetries";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::PayloadDecode: return "PayloadDecode";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MissingTag: return "MissingTag";
    case ErrorCode::MalformedTag: return "MalformedTag";
    case ErrorCode::UnparsableScore: return "UnparsableScore";
    case ErrorCode::MissingKey: return "MissingKey";
    case ErrorCode::UnparsableJson: return "UnparsableJson";
    case ErrorCode::MissingComponent: return "MissingComponent";
    case ErrorCode::RunFailed: return "RunFailed";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::string detail, int http_status)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      detail_(std::move(detail)),
      http_status_(http_status) {}

bool Error::is_backend_error() const noexcept {
    switch (code_) {
    case ErrorCode::Timeout:
    case ErrorCode::HttpStatus:
    case ErrorCode::ExhaustedRetries:
    case ErrorCode::Transport:
    case ErrorCode::PayloadDecode:
    case ErrorCode::DimensionMismatch:
        return true;
    default:
        return false;
    }
}

} // namespace mforge
