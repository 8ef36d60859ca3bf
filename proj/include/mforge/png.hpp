// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mforge::png {

bool has_signature(std::span<const std::uint8_t> bytes);

/// Encodes 8-bit RGB rows (width * 3 bytes each) as a PNG, with optional
/// tEXt chunks placed before the image data.
std::vector<std::uint8_t> encode_rgb(int width, int height, std::span<const std::uint8_t> rgb,
                                     const std::map<std::string, std::string>& text = {});

/// Value of the first tEXt chunk with the given keyword, if any.
std::optional<std::string> read_text(std::span<const std::uint8_t> bytes, const std::string& keyword);

struct Dimensions {
    int width = 0;
    int height = 0;
};

/// Reads IHDR; nullopt for non-PNG payloads.
std::optional<Dimensions> read_dimensions(std::span<const std::uint8_t> bytes);

} // namespace mforge::png
