#include "hygiea/binding.hpp"

#include "hygiea/crypto.hpp"

#include <array>
#include <cctype>

namespace hygiea::crypto {
namespace {

constexpr std::array<char const *, 4> kRequired{"name", "surname", "doc", "dob"};

// First UTF-8 code point, ASCII letters upper-cased.
std::string initial(std::string const &word)
{
  if (word.empty())
  {
    return {};
  }
  auto lead = static_cast<unsigned char>(word[0]);
  if (lead < 0x80)
  {
    return std::string(1, static_cast<char>(std::toupper(lead)));
  }
  std::size_t len = (lead >= 0xf0) ? 4 : (lead >= 0xe0) ? 3 : 2;
  return word.substr(0, len);
}

}  // namespace

std::string_view to_string(BindingMechanism mechanism)
{
  switch (mechanism)
  {
  case BindingMechanism::PartialInfo:
    return "PartialInfo";
  case BindingMechanism::FullInfo:
    return "FullInfo";
  case BindingMechanism::HashedInfo:
    return "HashedInfo";
  }
  return "HashedInfo";
}

BindingMechanism binding_mechanism_from_string(std::string_view text)
{
  if (text == "PartialInfo")
  {
    return BindingMechanism::PartialInfo;
  }
  if (text == "FullInfo")
  {
    return BindingMechanism::FullInfo;
  }
  if (text == "HashedInfo")
  {
    return BindingMechanism::HashedInfo;
  }
  throw BindingError("unknown binding mechanism: " + std::string(text));
}

BindingData bind_identity(FieldMap const &civil_identity, BindingMechanism mechanism)
{
  for (auto const *field : kRequired)
  {
    auto it = civil_identity.find(field);
    if (it == civil_identity.end() || it->second.empty())
    {
      throw BindingError(std::string("missing identity field: ") + field);
    }
  }

  BindingData out;
  out.mechanism = mechanism;
  switch (mechanism)
  {
  case BindingMechanism::PartialInfo:
  {
    auto const &doc  = civil_identity.at("doc");
    auto        tail = doc.size() > 4 ? doc.substr(doc.size() - 4) : doc;
    out.payload      = to_bytes(initial(civil_identity.at("name")) +
                                initial(civil_identity.at("surname")) + "|" + tail + "|" +
                                civil_identity.at("dob"));
    break;
  }
  case BindingMechanism::FullInfo:
    out.payload = to_bytes(canonical(civil_identity));
    break;
  case BindingMechanism::HashedInfo:
  {
    auto digest = hash_digest(canonical(civil_identity));
    out.payload.assign(digest.begin(), digest.end());
    break;
  }
  }
  return out;
}

}  // namespace hygiea::crypto
