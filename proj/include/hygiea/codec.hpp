#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hygiea {

using Bytes     = std::vector<std::uint8_t>;
using Digest    = std::array<std::uint8_t, 32>;
using Timestamp = std::uint64_t;  // seconds

inline constexpr Timestamp kHour = 3600;
inline constexpr Timestamp kDay  = 24 * kHour;

// Raised for malformed external encodings (hex, JSON payloads, files).
class DecodeError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

std::string to_hex(std::span<std::uint8_t const> data);

// Strict: lowercase only, even length.
Bytes from_hex(std::string_view hex);

Digest digest_from_hex(std::string_view hex);

inline Bytes to_bytes(std::string_view s)
{
  return Bytes(s.begin(), s.end());
}

void append_be64(Bytes &out, std::uint64_t value);

std::uint64_t parse_u64(std::string_view text);

// Ordered name -> value map. The canonical form is `name=value` pairs in name
// order joined with '|'; '\', '|' and '=' inside names or values are escaped
// with a backslash so the encoding is injective.
using FieldMap = std::map<std::string, std::string>;

std::string canonical(FieldMap const &fields);

// 20-byte account or contract address.
struct Address
{
  std::array<std::uint8_t, 20> bytes{};

  std::string hex() const;
  static Address from_hex(std::string_view hex);

  auto operator<=>(Address const &) const = default;
};

Address address_from_digest(Digest const &digest);

}  // namespace hygiea
