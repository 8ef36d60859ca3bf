// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mforge/backends.hpp"
#include "mforge/errors.hpp"

namespace mforge {

/// True for errors caused by the model's formatting rather than transport.
inline bool is_format_error(const Error& e) {
    switch (e.code()) {
    case ErrorCode::MissingTag:
    case ErrorCode::MalformedTag:
    case ErrorCode::UnparsableScore:
    case ErrorCode::MissingKey:
    case ErrorCode::UnparsableJson:
        return true;
    default:
        return false;
    }
}

/// Sends the request and parses the reply. On a format error the same
/// request is sent once more with `corrective` appended to the final
/// message; a second format error propagates. Backend errors are never
/// re-asked here (the transport already retried).
template <typename T>
T ask_with_reask(ChatBackend& backend, std::string_view system, std::vector<ChatMessage> messages,
                 const std::string& corrective, const std::function<T(const std::string&)>& parse,
                 int* attempts = nullptr) {
    if (attempts) *attempts = 1;
    std::string raw = backend.complete(system, messages);
    try {
        return parse(raw);
    } catch (const Error& e) {
        if (!is_format_error(e)) throw;
    }
    if (attempts) *attempts = 2;
    messages.back().text += corrective;
    raw = backend.complete(system, messages);
    return parse(raw);
}

} // namespace mforge
