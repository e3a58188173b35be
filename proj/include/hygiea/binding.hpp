#pragma once

#include "hygiea/codec.hpp"

#include <stdexcept>
#include <string>
#include <string_view>

namespace hygiea::crypto {

class BindingError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

// How much of the holder's civil identity is embedded in a certificate.
enum class BindingMechanism
{
  PartialInfo,  // initials, last 4 document digits, date of birth
  FullInfo,     // every identity field
  HashedInfo,   // SHA3-256 of every identity field
};

std::string_view to_string(BindingMechanism mechanism);
BindingMechanism binding_mechanism_from_string(std::string_view text);

struct BindingData
{
  BindingMechanism mechanism{BindingMechanism::HashedInfo};
  Bytes            payload;

  bool operator==(BindingData const &) const = default;
};

// Identity fields that must be present: name, surname, doc, dob.
BindingData bind_identity(FieldMap const &civil_identity, BindingMechanism mechanism);

}  // namespace hygiea::crypto
