#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace flowgate {

// FIPS 180-4 SHA-256. Self-contained so digests (fixture keys, embedder
// seeds) are identical on every platform regardless of linked crypto libs.
std::array<std::uint8_t, 32> sha256(std::string_view data);

std::string sha256_hex(std::string_view data);

} // namespace flowgate
