#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace selfgoal {

// Self-contained SHA-256. Used for request/cache digests and record digests
// so that digests are stable regardless of which TLS library is linked.
std::array<std::uint8_t, 32> sha256(std::string_view data);
std::string sha256_hex(std::string_view data);

std::string to_hex(const std::uint8_t* data, std::size_t n);

// 64-bit FNV-1a, for cheap non-cryptographic keys (label hashing).
std::uint64_t fnv1a64(std::string_view data);

// SplitMix64 step; the standard seed expander.
std::uint64_t splitmix64(std::uint64_t x);

// Deterministic seed derivation: one master seed plus a stream index gives
// independent, reproducible streams. Adding streams never perturbs others.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace selfgoal
