#include "hygiea/codec.hpp"

#include <algorithm>
#include <charconv>

namespace hygiea {
namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c)
{
  if (c >= '0' && c <= '9')
  {
    return c - '0';
  }
  if (c >= 'a' && c <= 'f')
  {
    return c - 'a' + 10;
  }
  return -1;
}

void append_escaped(std::string &out, std::string const &text)
{
  for (char c : text)
  {
    if (c == '\\' || c == '|' || c == '=')
    {
      out.push_back('\\');
    }
    out.push_back(c);
  }
}

}  // namespace

std::string to_hex(std::span<std::uint8_t const> data)
{
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data)
  {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0x0f]);
  }
  return out;
}

Bytes from_hex(std::string_view hex)
{
  if (hex.size() % 2 != 0)
  {
    throw DecodeError("hex string has odd length");
  }
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
  {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0)
    {
      throw DecodeError("invalid hex digit");
    }
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

Digest digest_from_hex(std::string_view hex)
{
  auto raw = from_hex(hex);
  if (raw.size() != 32)
  {
    throw DecodeError("digest must be 32 bytes");
  }
  Digest d{};
  std::copy(raw.begin(), raw.end(), d.begin());
  return d;
}

void append_be64(Bytes &out, std::uint64_t value)
{
  for (int shift = 56; shift >= 0; shift -= 8)
  {
    out.push_back(static_cast<std::uint8_t>(value >> shift));
  }
}

std::uint64_t parse_u64(std::string_view text)
{
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty() ||
      (text.size() > 1 && text[0] == '0'))
  {
    throw DecodeError("invalid unsigned integer: " + std::string(text));
  }
  return value;
}

std::string canonical(FieldMap const &fields)
{
  std::string out;
  bool first = true;
  for (auto const &[name, value] : fields)
  {
    if (!first)
    {
      out.push_back('|');
    }
    first = false;
    append_escaped(out, name);
    out.push_back('=');
    append_escaped(out, value);
  }
  return out;
}

std::string Address::hex() const
{
  return to_hex(bytes);
}

Address Address::from_hex(std::string_view hex)
{
  auto raw = hygiea::from_hex(hex);
  if (raw.size() != 20)
  {
    throw DecodeError("address must be 20 bytes");
  }
  Address a;
  std::copy(raw.begin(), raw.end(), a.bytes.begin());
  return a;
}

Address address_from_digest(Digest const &digest)
{
  Address a;
  std::copy(digest.end() - 20, digest.end(), a.bytes.begin());
  return a;
}

}  // namespace hygiea
