#pragma once

// Governance registry, certificate factory and certificate state machines.
// Contract state is mutated only by execute(), which the ledger calls while
// sealing a block.

#include "hygiea/binding.hpp"
#include "hygiea/codec.hpp"
#include "hygiea/crypto.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hygiea::contracts {

using crypto::BigInt;
using crypto::GroupParams;
using crypto::Signature;

enum class CertType
{
  Vaccination,
  Recovery,
  Test,
};

enum class RoleStatus
{
  Active,
  Inactive,
};

enum class LoggingClass
{
  ReadOnly,
  StateUpdating,
};

enum class StatusFlag
{
  Issued,
  Revoked,
};

enum class CertStatus
{
  Valid,
  NotYetValid,
  Expired,
  Revoked,
  InvalidSignature,
  IssuerUntrusted,
};

std::string_view to_string(CertType v);
std::string_view to_string(RoleStatus v);
std::string_view to_string(LoggingClass v);
std::string_view to_string(StatusFlag v);
std::string_view to_string(CertStatus v);

CertType     cert_type_from_string(std::string_view text);
RoleStatus   role_status_from_string(std::string_view text);
LoggingClass logging_class_from_string(std::string_view text);
StatusFlag   status_flag_from_string(std::string_view text);
CertStatus   cert_status_from_string(std::string_view text);

// Validity windows per certificate type, fixed at genesis.
struct Policy
{
  Timestamp test_validity{72 * kHour};
  Timestamp recovery_validity{180 * kDay};
  Timestamp vaccination_validity{365 * kDay};
  Timestamp vaccination_delay{21 * kDay};

  bool operator==(Policy const &) const = default;
};

struct CertificateDates
{
  Timestamp issuance_date;
  Timestamp valid_from;
  Timestamp expiry_date;
};

// Vaccination certificates become valid vaccination_delay after issuance;
// the validity window starts at valid_from.
CertificateDates certificate_dates(CertType type, Timestamp issuance, Policy const &policy);

struct IssuerRecord
{
  std::string        country;
  std::string        name;
  std::string        id;
  std::set<CertType> allowed_types;
  Timestamp          valid_from{0};
  RoleStatus         status{RoleStatus::Active};
  BigInt             pk;
  Signature          attestation;

  // Everything the Governing Body attestation covers.
  FieldMap attested_fields(GroupParams const &params) const;
};

struct VerifierRecord
{
  std::string  country;
  std::string  name;
  std::string  id;
  Timestamp    valid_from{0};
  RoleStatus   status{RoleStatus::Active};
  LoggingClass logging_class{LoggingClass::ReadOnly};
  BigInt       pk;
  Signature    attestation;

  FieldMap attested_fields(GroupParams const &params) const;
};

template <typename Record>
Signature attest(GroupParams const &params, BigInt const &gb_sk, Record const &record,
                 crypto::Rng &rng)
{
  return crypto::sign(params, gb_sk, canonical(record.attested_fields(params)), rng);
}

template <typename Record>
bool attestation_valid(GroupParams const &params, BigInt const &gb_pk, Record const &record)
{
  return crypto::verify(params, gb_pk, canonical(record.attested_fields(params)),
                        record.attestation);
}

struct Registry
{
  std::map<BigInt, IssuerRecord>   issuers;
  std::map<BigInt, VerifierRecord> verifiers;

  IssuerRecord const   *issuer(BigInt const &pk) const;
  VerifierRecord const *verifier(BigInt const &pk) const;
  bool                  issuer_active(BigInt const &pk) const;

  bool operator==(Registry const &) const;
};

struct Event
{
  std::string kind;
  std::string subject;

  bool operator==(Event const &) const = default;
};

struct GovernanceState
{
  BigInt               owner;  // Governing Body public key
  Registry             registry;
  std::vector<Address> revoked;  // on-chain revocation list, in revocation order
  std::vector<Event>   events;
};

struct FactoryState
{
  BigInt               owner;
  Address              governance;
  Policy               policy;
  std::vector<Address> issued;
};

struct Certificate
{
  crypto::BindingData personal_identifier;
  CertType            cert_type{CertType::Test};
  Timestamp           issuance_date{0};
  Timestamp           valid_from{0};
  Timestamp           expiry_date{0};
  BigInt              issuer_pk;
  Address             governance_address;
  StatusFlag          status_flag{StatusFlag::Issued};
  Signature           issuer_signature;
  BigInt              holder_pk;

  // All fields except status_flag and the signature itself.
  FieldMap signed_fields(GroupParams const &params) const;
};

Signature sign_certificate(GroupParams const &params, BigInt const &issuer_sk,
                           Certificate const &cert, crypto::Rng &rng);
bool      certificate_signature_valid(GroupParams const &params, Certificate const &cert);

struct VerificationLogEntry
{
  BigInt    verifier;
  Timestamp timestamp{0};
};

struct CertificateState
{
  Certificate                       cert;
  std::vector<VerificationLogEntry> verification_log;
};

using ContractState = std::variant<GovernanceState, FactoryState, CertificateState>;
using ContractStore = std::map<Address, ContractState>;

// Pure: Revoked, then InvalidSignature, then IssuerUntrusted, then
// NotYetValid, then Expired, else Valid.
CertStatus effective_status(GroupParams const &params, Certificate const &cert, Timestamp now,
                            Registry const &registry);

struct Call
{
  Address     to;
  std::string method;
  FieldMap    args;

  bool operator==(Call const &) const = default;
};

struct Receipt
{
  bool                   applied{false};
  std::string            reason;   // revert reason, empty when applied
  std::optional<Address> created;  // certificate address for create_certificate

  bool operator==(Receipt const &) const = default;
};

struct ExecutionContext
{
  GroupParams const &params;
  BigInt             caller;
  Timestamp          now;
};

// Runs one call. Either every effect is applied or none is and the receipt
// carries the revert reason.
Receipt execute(ContractStore &store, ExecutionContext const &ctx, Call const &call);

// Call payload builders. Arguments are flat string maps so the transaction
// signature covers a canonical byte string.
namespace calls {

Call register_issuer(GroupParams const &params, Address const &governance,
                     IssuerRecord const &record);
Call register_verifier(GroupParams const &params, Address const &governance,
                       VerifierRecord const &record);
Call set_status(GroupParams const &params, Address const &governance, BigInt const &pk,
                RoleStatus status, Signature const &new_attestation);
Call revoke_certificate(Address const &governance, Address const &certificate);
Call create_certificate(GroupParams const &params, Address const &factory,
                        Certificate const &cert);
Call log_verification(Address const &certificate, Timestamp timestamp);

}  // namespace calls

// Deployed at genesis by the Governing Body.
GovernanceState make_governance(BigInt const &owner);
FactoryState    make_factory(BigInt const &owner, Address const &governance, Policy const &policy);

// JSON forms. Parsing is strict: unknown or missing keys are errors.
nlohmann::json  to_json(GroupParams const &params, ContractStore const &store);
ContractStore   store_from_json(GroupParams const &params, nlohmann::json const &j);
nlohmann::json  to_json(GroupParams const &params, ContractState const &state);
nlohmann::json  to_json(GroupParams const &params, Registry const &registry);
Registry        registry_from_json(GroupParams const &params, nlohmann::json const &j);
nlohmann::json  to_json(GroupParams const &params, Certificate const &cert);
Certificate     certificate_from_json(GroupParams const &params, nlohmann::json const &j);
nlohmann::json  to_json(Policy const &policy);
Policy          policy_from_json(nlohmann::json const &j);

// H(canonical JSON of the whole store).
Digest state_root(GroupParams const &params, ContractStore const &store);

}  // namespace hygiea::contracts
