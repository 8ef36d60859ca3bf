// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/hashing.hpp"

#include <array>

#include <openssl/evp.h>
#include <openssl/sha.h>

#include "mforge/errors.hpp"

namespace mforge {

namespace {

std::array<unsigned char, SHA256_DIGEST_LENGTH> digest(const void* data, std::size_t size) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> out{};
    SHA256(static_cast<const unsigned char*>(data), size, out.data());
    return out;
}

std::string to_hex(std::span<const unsigned char> raw) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex;
    hex.reserve(raw.size() * 2);
    for (unsigned char c : raw) {
        hex.push_back(kHex[c >> 4]);
        hex.push_back(kHex[c & 0x0F]);
    }
    return hex;
}

} // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    auto d = digest(bytes.data(), bytes.size());
    return to_hex(d);
}

std::string sha256_hex(std::string_view text) {
    auto d = digest(text.data(), text.size());
    return to_hex(d);
}

std::uint64_t sha256_u64(std::string_view text) {
    auto d = digest(text.data(), text.size());
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | d[static_cast<std::size_t>(i)];
    return v;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) return {};
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                            static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    std::string clean;
    clean.reserve(text.size());
    for (char c : text) {
        if (c != '\n' && c != '\r' && c != ' ' && c != '\t') clean.push_back(c);
    }
    if (clean.empty()) return {};
    if (clean.size() % 4 != 0) throw Error(ErrorCode::PayloadDecode, "base64 length is not a multiple of 4");
    std::vector<std::uint8_t> out(3 * clean.size() / 4);
    int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                            static_cast<int>(clean.size()));
    if (n < 0) throw Error(ErrorCode::PayloadDecode, "invalid base64 payload");
    // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
    std::size_t pad = 0;
    if (clean.back() == '=') ++pad;
    if (clean.size() >= 2 && clean[clean.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

} // namespace mforge
