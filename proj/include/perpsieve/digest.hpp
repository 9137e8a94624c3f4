#pragma once

#include <string>
#include <string_view>

namespace perpsieve {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// Digest of a JSON document after canonicalization (sorted keys, compact, shortest round-trip numbers).
std::string canonical_json_digest(std::string_view json_text);

}  // namespace perpsieve
