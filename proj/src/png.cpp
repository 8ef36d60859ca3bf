// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/png.hpp"

#include <csetjmp>
#include <cstring>

#include <png.h>

#include "mforge/errors.hpp"

namespace mforge::png {

namespace {

struct ReadCursor {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
};

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

void read_from_span(png_structp png, png_bytep data, png_size_t length) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->pos + length > cur->bytes.size()) png_error(png, "truncated PNG");
    std::memcpy(data, cur->bytes.data() + cur->pos, length);
    cur->pos += length;
}

void quiet_warning(png_structp, png_const_charp) {}

// setjmp frames below hold only trivially destructible locals; anything
// owning memory lives in the caller.

bool write_png(std::vector<std::uint8_t>& out, int width, int height, const std::uint8_t* rgb,
               std::vector<png_text>& texts) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, quiet_warning);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, info ? &info : nullptr);
        return false;
    }
    png_set_write_fn(png, &out, write_to_vector, flush_noop);
    png_set_compression_level(png, 1);
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_BASE, PNG_FILTER_TYPE_BASE);
    if (!texts.empty()) png_set_text(png, info, texts.data(), static_cast<int>(texts.size()));
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(width) * 3;
    for (int y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(rgb + static_cast<std::size_t>(y) * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

/// Reads the chunks ahead of the image data. `fn(png, info)` runs on success.
template <typename Fn>
bool read_header(std::span<const std::uint8_t> bytes, Fn&& fn) {
    ReadCursor cur{bytes, 0};
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, quiet_warning);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        return false;
    }
    png_set_read_fn(png, &cur, read_from_span);
    png_read_info(png, info);
    fn(png, info);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

} // namespace

bool has_signature(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

std::vector<std::uint8_t> encode_rgb(int width, int height, std::span<const std::uint8_t> rgb,
                                     const std::map<std::string, std::string>& text) {
    if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
    if (rgb.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3)
        throw Error(ErrorCode::InvalidArgument, "pixel buffer does not match dimensions");

    std::vector<std::string> keys, values;
    for (const auto& [k, v] : text) {
        keys.push_back(k);
        values.push_back(v);
    }
    std::vector<png_text> texts(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
        texts[i].compression = PNG_TEXT_COMPRESSION_NONE;
        texts[i].key = keys[i].data();
        texts[i].text = values[i].data();
        texts[i].text_length = values[i].size();
    }
    std::vector<std::uint8_t> out;
    out.reserve(rgb.size() / 8);
    if (!write_png(out, width, height, rgb.data(), texts)) throw Error(ErrorCode::Io, "PNG encoding failed");
    return out;
}

std::optional<std::string> read_text(std::span<const std::uint8_t> bytes, const std::string& keyword) {
    if (!has_signature(bytes)) return std::nullopt;
    std::optional<std::string> found;
    read_header(bytes, [&](png_structp png, png_infop info) {
        png_textp texts = nullptr;
        int n = png_get_text(png, info, &texts, nullptr);
        for (int i = 0; i < n && !found; ++i)
            if (keyword == texts[i].key) found = std::string(texts[i].text, texts[i].text_length);
    });
    return found;
}

std::optional<Dimensions> read_dimensions(std::span<const std::uint8_t> bytes) {
    if (!has_signature(bytes)) return std::nullopt;
    std::optional<Dimensions> dims;
    read_header(bytes, [&](png_structp png, png_infop info) {
        dims = Dimensions{static_cast<int>(png_get_image_width(png, info)),
                          static_cast<int>(png_get_image_height(png, info))};
    });
    return dims;
}

} // namespace mforge::png
