// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mforge {

enum class ErrorCode {
    InvalidArgument,
    EmptyMetaphor,
    Timeout,
    HttpStatus,
    ExhaustedRetries,
    Transport,
    PayloadDecode,
    DimensionMismatch,
    MissingTag,
    MalformedTag,
    UnparsableScore,
    MissingKey,
    UnparsableJson,
    MissingComponent,
    RunFailed,
    Config,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Typed error carried by every failure the library surfaces.
/// `detail()` holds the offending tag/key name where one applies.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string detail = {}, int http_status = 0);

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }
    int http_status() const noexcept { return http_status_; }

    /// True for failures raised by a model backend (transport, status, decode).
    bool is_backend_error() const noexcept;

private:
    ErrorCode code_;
    std::string detail_;
    int http_status_;
};

} // namespace mforge
