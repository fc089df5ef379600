#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "hsdlab/types.hpp"

namespace hsd {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::span<const std::uint8_t> bytes);
std::string to_hex(std::span<const std::uint8_t> bytes);

std::string sha256_hex(std::string_view text);

/// Digest of the raw IEEE-754 bytes of an observation.
std::string observation_digest(const Observation& obs);

}  // namespace hsd
