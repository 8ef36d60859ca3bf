// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "json.hpp"

namespace mforge {

using TagMap = std::map<std::string, std::string>;

enum class TagStatus { Present, Missing, Malformed };

/// Locates the first `<name>...</name>` pair. A second `<name>` before the
/// closing tag (nesting) or a missing closing tag makes it Malformed.
/// On Present, `content` (if given) receives the trimmed inner text.
TagStatus probe_tag(std::string_view raw, std::string_view name, std::string* content = nullptr);

/// Extracts every required tag; prose, code fences and unrelated tags
/// around them are ignored. Throws Error{MissingTag} / Error{MalformedTag}
/// with the tag name as detail, checking tags in the order given.
TagMap parse_tagged(std::string_view raw, std::span<const std::string_view> required);

/// Wire form used by round-trip tests and the mock backends.
std::string serialize_tags(const TagMap& tags);

/// Parses a bare decimal. Throws Error{UnparsableScore} for anything else
/// (words, NaN, trailing junk).
double parse_score(std::string_view text, std::string_view field);

struct UnitScore {
    double value = 0.0;
    bool clamped = false;
};

/// Clamps into [0, 1]; idempotent.
UnitScore clamp_unit(double v);

/// Returns the first balanced top-level `{...}` object in `raw`, skipping
/// surrounding prose and code fences. Braces inside JSON strings are
/// honoured. Throws Error{UnparsableJson} when none parses.
nlohmann::json extract_first_json_object(std::string_view raw);

/// Removes a surrounding ``` fence (with optional language tag) and one
/// layer of matching quotes.
std::string strip_fences_and_quotes(std::string_view raw);

} // namespace mforge
