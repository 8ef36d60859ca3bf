// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/tag_parser.hpp"

#include <charconv>
#include <cmath>

#include "mforge/errors.hpp"
#include "mforge/model.hpp"

namespace mforge {

TagStatus probe_tag(std::string_view raw, std::string_view name, std::string* content) {
    const std::string open = "<" + std::string(name) + ">";
    const std::string close = "</" + std::string(name) + ">";
    auto start = raw.find(open);
    if (start == std::string_view::npos) return TagStatus::Missing;
    auto body = start + open.size();
    auto end = raw.find(close, body);
    if (end == std::string_view::npos) return TagStatus::Malformed;
    auto nested = raw.find(open, body);
    if (nested != std::string_view::npos && nested < end) return TagStatus::Malformed;
    if (content) *content = trim(raw.substr(body, end - body));
    return TagStatus::Present;
}

TagMap parse_tagged(std::string_view raw, std::span<const std::string_view> required) {
    if (required.empty()) throw Error(ErrorCode::InvalidArgument, "parse_tagged needs at least one required tag");
    TagMap out;
    for (auto name : required) {
        std::string content;
        switch (probe_tag(raw, name, &content)) {
        case TagStatus::Present:
            out.emplace(std::string(name), std::move(content));
            break;
        case TagStatus::Missing:
            throw Error(ErrorCode::MissingTag, "required tag <" + std::string(name) + "> not found", std::string(name));
        case TagStatus::Malformed:
            throw Error(ErrorCode::MalformedTag, "tag <" + std::string(name) + "> is not properly closed",
                        std::string(name));
        }
    }
    return out;
}

std::string serialize_tags(const TagMap& tags) {
    std::string out;
    for (const auto& [k, v] : tags) out += "<" + k + ">" + v + "</" + k + ">\n";
    return out;
}

double parse_score(std::string_view text, std::string_view field) {
    std::string t = trim(text);
    double v = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (!t.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (t.empty() || ec != std::errc{} || ptr != last || !std::isfinite(v))
        throw Error(ErrorCode::UnparsableScore, "'" + t + "' is not a numeric score", std::string(field));
    return v;
}

UnitScore clamp_unit(double v) {
    if (v < 0.0) return {0.0, true};
    if (v > 1.0) return {1.0, true};
    return {v, false};
}

nlohmann::json extract_first_json_object(std::string_view raw) {
    std::size_t from = 0;
    while (true) {
        auto start = raw.find('{', from);
        if (start == std::string_view::npos) break;
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        std::size_t end = std::string_view::npos;
        for (std::size_t i = start; i < raw.size(); ++i) {
            char c = raw[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}' && --depth == 0) {
                end = i;
                break;
            }
        }
        if (end == std::string_view::npos) break;
        auto parsed = nlohmann::json::parse(raw.substr(start, end - start + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
        from = start + 1;
    }
    throw Error(ErrorCode::UnparsableJson, "no balanced JSON object found in reply");
}

std::string strip_fences_and_quotes(std::string_view raw) {
    std::string s = trim(raw);
    if (s.rfind("```", 0) == 0) {
        auto nl = s.find('\n');
        s = nl == std::string::npos ? s.substr(3) : s.substr(nl + 1);
        auto close = s.rfind("```");
        if (close != std::string::npos) s = s.substr(0, close);
        s = trim(s);
    }
    if (s.size() >= 2) {
        char f = s.front();
        char b = s.back();
        if ((f == '"' && b == '"') || (f == '\'' && b == '\'') || (f == '`' && b == '`')) s = trim(s.substr(1, s.size() - 2));
    }
    return s;
}

} // namespace mforge
