#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace masorch {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// First `hex_chars` characters of sha256_hex; used for compact prompt digests.
std::string short_digest(std::string_view data, std::size_t hex_chars = 16);

/// 64-bit value derived from the SHA-256 of `data`; stable across processes.
std::uint64_t digest_u64(std::string_view data);

std::string base64_encode(std::span<const unsigned char> bytes);

}  // namespace masorch
