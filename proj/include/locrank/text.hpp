#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace locrank::text {

// Lowercased runs of [a-z0-9]; everything else is a separator.
std::vector<std::string> alnum_tokens(std::string_view s);

// Whitespace-delimited token count, the default token-budget measure.
std::size_t ws_token_count(std::string_view s);

// Longest prefix of `s` containing at most `max_tokens` whitespace-delimited
// tokens, with trailing whitespace trimmed. Original spacing is preserved.
std::string truncate_ws_tokens(std::string_view s, std::size_t max_tokens);

// FNV-1a, 64-bit. `seed` perturbs the initial basis so independent hash
// families can be derived from one function.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0);

// Lowercase hex rendering of a 64-bit value, zero padded to 16 chars.
std::string hex64(std::uint64_t v);

} // namespace locrank::text
