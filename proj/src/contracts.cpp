#include "hygiea/contracts.hpp"

#include <algorithm>
#include <initializer_list>

namespace hygiea::contracts {
namespace {

using crypto::element_from_hex;
using crypto::element_to_hex;
using crypto::signature_from_hex;
using crypto::signature_to_hex;

// Thrown inside execute(); converted into a reverted receipt.
struct Revert
{
  std::string reason;
};

[[noreturn]] void revert(std::string reason)
{
  throw Revert{std::move(reason)};
}

std::string join_types(std::set<CertType> const &types)
{
  std::vector<std::string> names;
  for (auto t : types)
  {
    names.emplace_back(to_string(t));
  }
  std::sort(names.begin(), names.end());
  std::string out;
  for (auto const &n : names)
  {
    if (!out.empty())
    {
      out.push_back(',');
    }
    out += n;
  }
  return out;
}

std::set<CertType> split_types(std::string const &text)
{
  std::set<CertType> out;
  std::size_t        start = 0;
  while (start < text.size())
  {
    auto end = text.find(',', start);
    if (end == std::string::npos)
    {
      end = text.size();
    }
    out.insert(cert_type_from_string(text.substr(start, end - start)));
    start = end + 1;
  }
  return out;
}

// Arguments must be exactly the expected set.
void expect_args(FieldMap const &args, std::initializer_list<char const *> names)
{
  if (args.size() != names.size())
  {
    revert("malformed arguments");
  }
  for (auto const *n : names)
  {
    if (args.find(n) == args.end())
    {
      revert("malformed arguments");
    }
  }
}

template <typename T>
T const &as(ContractStore const &store, Address const &addr, char const *what)
{
  auto it = store.find(addr);
  if (it == store.end() || !std::holds_alternative<T>(it->second))
  {
    revert(std::string("no ") + what + " contract at address");
  }
  return std::get<T>(it->second);
}

FieldMap issuer_args(GroupParams const &params, IssuerRecord const &r)
{
  auto f           = r.attested_fields(params);
  f["attestation"] = signature_to_hex(params, r.attestation);
  return f;
}

IssuerRecord parse_issuer(GroupParams const &params, FieldMap const &a)
{
  expect_args(a, {"role", "country", "name", "id", "allowed_types", "valid_from", "status", "pk",
                  "attestation"});
  if (a.at("role") != "issuer")
  {
    revert("malformed arguments");
  }
  IssuerRecord r;
  r.country       = a.at("country");
  r.name          = a.at("name");
  r.id            = a.at("id");
  r.allowed_types = split_types(a.at("allowed_types"));
  r.valid_from    = parse_u64(a.at("valid_from"));
  r.status        = role_status_from_string(a.at("status"));
  r.pk            = element_from_hex(params, a.at("pk"));
  r.attestation   = signature_from_hex(params, a.at("attestation"));
  return r;
}

VerifierRecord parse_verifier(GroupParams const &params, FieldMap const &a)
{
  expect_args(a, {"role", "country", "name", "id", "valid_from", "status", "logging_class", "pk",
                  "attestation"});
  if (a.at("role") != "verifier")
  {
    revert("malformed arguments");
  }
  VerifierRecord r;
  r.country       = a.at("country");
  r.name          = a.at("name");
  r.id            = a.at("id");
  r.valid_from    = parse_u64(a.at("valid_from"));
  r.status        = role_status_from_string(a.at("status"));
  r.logging_class = logging_class_from_string(a.at("logging_class"));
  r.pk            = element_from_hex(params, a.at("pk"));
  r.attestation   = signature_from_hex(params, a.at("attestation"));
  return r;
}

Certificate parse_certificate(GroupParams const &params, FieldMap const &a)
{
  expect_args(a, {"binding_mechanism", "binding_payload", "cert_type", "issuance_date",
                  "valid_from", "expiry_date", "issuer_pk", "governance_address", "holder_pk",
                  "issuer_signature"});
  Certificate c;
  c.personal_identifier.mechanism =
      crypto::binding_mechanism_from_string(a.at("binding_mechanism"));
  c.personal_identifier.payload = from_hex(a.at("binding_payload"));
  c.cert_type                   = cert_type_from_string(a.at("cert_type"));
  c.issuance_date               = parse_u64(a.at("issuance_date"));
  c.valid_from                  = parse_u64(a.at("valid_from"));
  c.expiry_date                 = parse_u64(a.at("expiry_date"));
  c.issuer_pk                   = element_from_hex(params, a.at("issuer_pk"));
  c.governance_address          = Address::from_hex(a.at("governance_address"));
  c.holder_pk                   = element_from_hex(params, a.at("holder_pk"));
  c.issuer_signature            = signature_from_hex(params, a.at("issuer_signature"));
  return c;
}

void require_owner(GovernanceState const &gov, BigInt const &caller)
{
  if (caller != gov.owner)
  {
    revert("only Governing Body");
  }
}

void register_issuer(GovernanceState &gov, ExecutionContext const &ctx, FieldMap const &args)
{
  require_owner(gov, ctx.caller);
  auto record = parse_issuer(ctx.params, args);
  if (!crypto::is_element(ctx.params, record.pk))
  {
    revert("invalid public key");
  }
  if (!attestation_valid(ctx.params, gov.owner, record))
  {
    revert("invalid attestation");
  }
  if (record.status == RoleStatus::Active && record.allowed_types.empty())
  {
    revert("active issuer needs at least one certificate type");
  }
  if (gov.registry.issuers.count(record.pk) != 0)
  {
    revert("issuer already registered");
  }
  gov.events.push_back({"register_issuer", element_to_hex(ctx.params, record.pk)});
  gov.registry.issuers.emplace(record.pk, std::move(record));
}

void register_verifier(GovernanceState &gov, ExecutionContext const &ctx, FieldMap const &args)
{
  require_owner(gov, ctx.caller);
  auto record = parse_verifier(ctx.params, args);
  if (!crypto::is_element(ctx.params, record.pk))
  {
    revert("invalid public key");
  }
  if (!attestation_valid(ctx.params, gov.owner, record))
  {
    revert("invalid attestation");
  }
  if (gov.registry.verifiers.count(record.pk) != 0)
  {
    revert("verifier already registered");
  }
  gov.events.push_back({"register_verifier", element_to_hex(ctx.params, record.pk)});
  gov.registry.verifiers.emplace(record.pk, std::move(record));
}

template <typename Record>
void update_status(GovernanceState const &gov, ExecutionContext const &ctx, Record &record,
                   RoleStatus status, Signature const &attestation)
{
  Record updated      = record;
  updated.status      = status;
  updated.attestation = attestation;
  if (!attestation_valid(ctx.params, gov.owner, updated))
  {
    revert("invalid attestation");
  }
  record = std::move(updated);
}

void set_status(GovernanceState &gov, ExecutionContext const &ctx, FieldMap const &args)
{
  require_owner(gov, ctx.caller);
  expect_args(args, {"pk", "status", "attestation"});
  auto pk          = element_from_hex(ctx.params, args.at("pk"));
  auto status      = role_status_from_string(args.at("status"));
  auto attestation = signature_from_hex(ctx.params, args.at("attestation"));

  if (auto it = gov.registry.issuers.find(pk); it != gov.registry.issuers.end())
  {
    if (status == RoleStatus::Active && it->second.allowed_types.empty())
    {
      revert("active issuer needs at least one certificate type");
    }
    update_status(gov, ctx, it->second, status, attestation);
  }
  else if (auto vt = gov.registry.verifiers.find(pk); vt != gov.registry.verifiers.end())
  {
    update_status(gov, ctx, vt->second, status, attestation);
  }
  else
  {
    revert("unknown public key");
  }
  gov.events.push_back({std::string("set_status:") + std::string(to_string(status)),
                        args.at("pk")});
}

void revoke_certificate(GovernanceState &gov, ContractStore &store, ExecutionContext const &ctx,
                        FieldMap const &args)
{
  require_owner(gov, ctx.caller);
  expect_args(args, {"certificate"});
  auto addr = Address::from_hex(args.at("certificate"));
  auto it   = store.find(addr);
  if (it == store.end() || !std::holds_alternative<CertificateState>(it->second))
  {
    revert("unknown certificate");
  }
  auto &cert = std::get<CertificateState>(it->second).cert;
  if (cert.status_flag == StatusFlag::Revoked)
  {
    return;  // idempotent
  }
  cert.status_flag = StatusFlag::Revoked;
  gov.revoked.push_back(addr);
  gov.events.push_back({"revoke_certificate", addr.hex()});
}

Address create_certificate(Address const &factory_addr, ContractStore &store,
                        ExecutionContext const &ctx, FieldMap const &args)
{
  auto const &factory = as<FactoryState>(store, factory_addr, "factory");
  auto const &gov     = as<GovernanceState>(store, factory.governance, "governance");
  auto        cert    = parse_certificate(ctx.params, args);

  auto const *issuer = gov.registry.issuer(ctx.caller);
  if (issuer == nullptr)
  {
    revert("issuer not registered");
  }
  if (issuer->status != RoleStatus::Active)
  {
    revert("issuer inactive");
  }
  if (ctx.now < issuer->valid_from)
  {
    revert("issuer not yet valid");
  }
  if (issuer->allowed_types.count(cert.cert_type) == 0)
  {
    revert("certificate type not allowed for issuer");
  }
  if (cert.issuance_date > ctx.now || cert.valid_from < cert.issuance_date ||
      cert.expiry_date <= cert.valid_from)
  {
    revert("malformed dates");
  }
  if (cert.cert_type == CertType::Vaccination &&
      cert.valid_from < cert.issuance_date + factory.policy.vaccination_delay)
  {
    revert("malformed dates");
  }
  if (cert.issuer_pk != ctx.caller || cert.governance_address != factory.governance)
  {
    revert("certificate fields do not match issuer");
  }
  if (!crypto::is_element(ctx.params, cert.holder_pk))
  {
    revert("invalid holder key");
  }
  if (cert.personal_identifier.mechanism == crypto::BindingMechanism::HashedInfo &&
      cert.personal_identifier.payload.size() != 32)
  {
    revert("malformed binding");
  }
  if (!certificate_signature_valid(ctx.params, cert))
  {
    revert("invalid issuer signature");
  }

  auto addr = crypto::contract_address(factory_addr, factory.issued.size());
  if (store.count(addr) != 0)
  {
    revert("address collision");
  }
  cert.status_flag = StatusFlag::Issued;
  store.emplace(addr, CertificateState{std::move(cert), {}});
  std::get<FactoryState>(store.at(factory_addr)).issued.push_back(addr);
  return addr;
}

void log_verification(CertificateState &state, ContractStore const &store,
                      ExecutionContext const &ctx, FieldMap const &args)
{
  expect_args(args, {"timestamp"});
  auto        ts  = parse_u64(args.at("timestamp"));
  auto const &gov = as<GovernanceState>(store, state.cert.governance_address, "governance");
  auto const *verifier = gov.registry.verifier(ctx.caller);
  if (verifier == nullptr)
  {
    revert("verifier not registered");
  }
  if (verifier->status != RoleStatus::Active)
  {
    revert("verifier inactive");
  }
  if (verifier->logging_class != LoggingClass::StateUpdating)
  {
    revert("verifier class is read-only");
  }
  if (ts > ctx.now)
  {
    revert("verification timestamp in the future");
  }
  if (!state.verification_log.empty() && ts < state.verification_log.back().timestamp)
  {
    revert("verification timestamp out of order");
  }
  state.verification_log.push_back({ctx.caller, ts});
}

template <typename E, std::size_t N>
E from_table(std::string_view text, std::array<std::pair<E, char const *>, N> const &table,
             char const *what)
{
  for (auto const &[value, name] : table)
  {
    if (text == name)
    {
      return value;
    }
  }
  throw DecodeError(std::string("unknown ") + what + ": " + std::string(text));
}

template <typename E, std::size_t N>
std::string_view to_table(E value, std::array<std::pair<E, char const *>, N> const &table)
{
  for (auto const &[v, name] : table)
  {
    if (v == value)
    {
      return name;
    }
  }
  return "?";
}

constexpr std::array<std::pair<CertType, char const *>, 3> kCertTypes{{
    {CertType::Vaccination, "Vaccination"},
    {CertType::Recovery, "Recovery"},
    {CertType::Test, "Test"},
}};
constexpr std::array<std::pair<RoleStatus, char const *>, 2> kRoleStatus{{
    {RoleStatus::Active, "Active"},
    {RoleStatus::Inactive, "Inactive"},
}};
constexpr std::array<std::pair<LoggingClass, char const *>, 2> kLoggingClass{{
    {LoggingClass::ReadOnly, "ReadOnly"},
    {LoggingClass::StateUpdating, "StateUpdating"},
}};
constexpr std::array<std::pair<StatusFlag, char const *>, 2> kStatusFlag{{
    {StatusFlag::Issued, "Issued"},
    {StatusFlag::Revoked, "Revoked"},
}};
constexpr std::array<std::pair<CertStatus, char const *>, 6> kCertStatus{{
    {CertStatus::Valid, "Valid"},
    {CertStatus::NotYetValid, "NotYetValid"},
    {CertStatus::Expired, "Expired"},
    {CertStatus::Revoked, "Revoked"},
    {CertStatus::InvalidSignature, "InvalidSignature"},
    {CertStatus::IssuerUntrusted, "IssuerUntrusted"},
}};

}  // namespace

std::string_view to_string(CertType v)
{
  return to_table(v, kCertTypes);
}
std::string_view to_string(RoleStatus v)
{
  return to_table(v, kRoleStatus);
}
std::string_view to_string(LoggingClass v)
{
  return to_table(v, kLoggingClass);
}
std::string_view to_string(StatusFlag v)
{
  return to_table(v, kStatusFlag);
}
std::string_view to_string(CertStatus v)
{
  return to_table(v, kCertStatus);
}

CertType cert_type_from_string(std::string_view text)
{
  return from_table(text, kCertTypes, "certificate type");
}
RoleStatus role_status_from_string(std::string_view text)
{
  return from_table(text, kRoleStatus, "status");
}
LoggingClass logging_class_from_string(std::string_view text)
{
  return from_table(text, kLoggingClass, "logging class");
}
StatusFlag status_flag_from_string(std::string_view text)
{
  return from_table(text, kStatusFlag, "status flag");
}
CertStatus cert_status_from_string(std::string_view text)
{
  return from_table(text, kCertStatus, "certificate status");
}

CertificateDates certificate_dates(CertType type, Timestamp issuance, Policy const &policy)
{
  switch (type)
  {
  case CertType::Vaccination:
  {
    auto from = issuance + policy.vaccination_delay;
    return {issuance, from, from + policy.vaccination_validity};
  }
  case CertType::Recovery:
    return {issuance, issuance, issuance + policy.recovery_validity};
  case CertType::Test:
    return {issuance, issuance, issuance + policy.test_validity};
  }
  return {issuance, issuance, issuance};
}

FieldMap IssuerRecord::attested_fields(GroupParams const &params) const
{
  return {
      {"role", "issuer"},
      {"country", country},
      {"name", name},
      {"id", id},
      {"allowed_types", join_types(allowed_types)},
      {"valid_from", std::to_string(valid_from)},
      {"status", std::string(to_string(status))},
      {"pk", element_to_hex(params, pk)},
  };
}

FieldMap VerifierRecord::attested_fields(GroupParams const &params) const
{
  return {
      {"role", "verifier"},
      {"country", country},
      {"name", name},
      {"id", id},
      {"valid_from", std::to_string(valid_from)},
      {"status", std::string(to_string(status))},
      {"logging_class", std::string(to_string(logging_class))},
      {"pk", element_to_hex(params, pk)},
  };
}

IssuerRecord const *Registry::issuer(BigInt const &pk) const
{
  auto it = issuers.find(pk);
  return it == issuers.end() ? nullptr : &it->second;
}

VerifierRecord const *Registry::verifier(BigInt const &pk) const
{
  auto it = verifiers.find(pk);
  return it == verifiers.end() ? nullptr : &it->second;
}

bool Registry::issuer_active(BigInt const &pk) const
{
  auto const *r = issuer(pk);
  return r != nullptr && r->status == RoleStatus::Active;
}

bool Registry::operator==(Registry const &other) const
{
  auto same_issuer = [](auto const &a, auto const &b) {
    return a.first == b.first && a.second.country == b.second.country &&
           a.second.name == b.second.name && a.second.id == b.second.id &&
           a.second.allowed_types == b.second.allowed_types &&
           a.second.valid_from == b.second.valid_from && a.second.status == b.second.status &&
           a.second.attestation == b.second.attestation;
  };
  auto same_verifier = [](auto const &a, auto const &b) {
    return a.first == b.first && a.second.country == b.second.country &&
           a.second.name == b.second.name && a.second.id == b.second.id &&
           a.second.valid_from == b.second.valid_from && a.second.status == b.second.status &&
           a.second.logging_class == b.second.logging_class &&
           a.second.attestation == b.second.attestation;
  };
  return std::equal(issuers.begin(), issuers.end(), other.issuers.begin(), other.issuers.end(),
                    same_issuer) &&
         std::equal(verifiers.begin(), verifiers.end(), other.verifiers.begin(),
                    other.verifiers.end(), same_verifier);
}

FieldMap Certificate::signed_fields(GroupParams const &params) const
{
  return {
      {"binding_mechanism", std::string(crypto::to_string(personal_identifier.mechanism))},
      {"binding_payload", to_hex(personal_identifier.payload)},
      {"cert_type", std::string(to_string(cert_type))},
      {"issuance_date", std::to_string(issuance_date)},
      {"valid_from", std::to_string(valid_from)},
      {"expiry_date", std::to_string(expiry_date)},
      {"issuer_pk", element_to_hex(params, issuer_pk)},
      {"governance_address", governance_address.hex()},
      {"holder_pk", element_to_hex(params, holder_pk)},
  };
}

Signature sign_certificate(GroupParams const &params, BigInt const &issuer_sk,
                           Certificate const &cert, crypto::Rng &rng)
{
  return crypto::sign(params, issuer_sk, canonical(cert.signed_fields(params)), rng);
}

bool certificate_signature_valid(GroupParams const &params, Certificate const &cert)
{
  return crypto::verify(params, cert.issuer_pk, canonical(cert.signed_fields(params)),
                        cert.issuer_signature);
}

CertStatus effective_status(GroupParams const &params, Certificate const &cert, Timestamp now,
                            Registry const &registry)
{
  if (cert.status_flag == StatusFlag::Revoked)
  {
    return CertStatus::Revoked;
  }
  if (!certificate_signature_valid(params, cert))
  {
    return CertStatus::InvalidSignature;
  }
  if (!registry.issuer_active(cert.issuer_pk))
  {
    return CertStatus::IssuerUntrusted;
  }
  if (now < cert.valid_from)
  {
    return CertStatus::NotYetValid;
  }
  if (now > cert.expiry_date)
  {
    return CertStatus::Expired;
  }
  return CertStatus::Valid;
}

Receipt execute(ContractStore &store, ExecutionContext const &ctx, Call const &call)
{
  // Work on a copy so a revert leaves the store untouched.
  ContractStore scratch = store;
  Receipt       receipt;
  try
  {
    auto it = scratch.find(call.to);
    if (it == scratch.end())
    {
      revert("no contract at address");
    }
    std::visit(
        [&](auto &state) {
          using T = std::decay_t<decltype(state)>;
          if constexpr (std::is_same_v<T, GovernanceState>)
          {
            if (call.method == "register_issuer")
            {
              register_issuer(state, ctx, call.args);
            }
            else if (call.method == "register_verifier")
            {
              register_verifier(state, ctx, call.args);
            }
            else if (call.method == "set_status")
            {
              set_status(state, ctx, call.args);
            }
            else if (call.method == "revoke_certificate")
            {
              revoke_certificate(state, scratch, ctx, call.args);
            }
            else
            {
              revert("unknown method");
            }
          }
          else if constexpr (std::is_same_v<T, FactoryState>)
          {
            if (call.method == "create_certificate")
            {
              receipt.created = create_certificate(call.to, scratch, ctx, call.args);
            }
            else
            {
              revert("unknown method");
            }
          }
          else
          {
            if (call.method == "log_verification")
            {
              log_verification(state, scratch, ctx, call.args);
            }
            else
            {
              revert("unknown method");
            }
          }
        },
        it->second);
    receipt.applied = true;
  }
  catch (Revert const &r)
  {
    receipt.created.reset();
    receipt.reason = r.reason;
  }
  catch (DecodeError const &)
  {
    receipt.reason = "malformed arguments";
  }
  catch (crypto::BindingError const &)
  {
    receipt.reason = "malformed arguments";
  }
  if (receipt.applied)
  {
    store = std::move(scratch);
  }
  return receipt;
}

namespace calls {

Call register_issuer(GroupParams const &params, Address const &governance,
                     IssuerRecord const &record)
{
  return Call{governance, "register_issuer", issuer_args(params, record)};
}

Call register_verifier(GroupParams const &params, Address const &governance,
                       VerifierRecord const &record)
{
  auto f           = record.attested_fields(params);
  f["attestation"] = signature_to_hex(params, record.attestation);
  return Call{governance, "register_verifier", std::move(f)};
}

Call set_status(GroupParams const &params, Address const &governance, BigInt const &pk,
                RoleStatus status, Signature const &new_attestation)
{
  return Call{governance,
              "set_status",
              {{"pk", element_to_hex(params, pk)},
               {"status", std::string(to_string(status))},
               {"attestation", signature_to_hex(params, new_attestation)}}};
}

Call revoke_certificate(Address const &governance, Address const &certificate)
{
  return Call{governance, "revoke_certificate", {{"certificate", certificate.hex()}}};
}

Call create_certificate(GroupParams const &params, Address const &factory,
                        Certificate const &cert)
{
  auto f                = cert.signed_fields(params);
  f["issuer_signature"] = signature_to_hex(params, cert.issuer_signature);
  return Call{factory, "create_certificate", std::move(f)};
}

Call log_verification(Address const &certificate, Timestamp timestamp)
{
  return Call{certificate, "log_verification", {{"timestamp", std::to_string(timestamp)}}};
}

}  // namespace calls

GovernanceState make_governance(BigInt const &owner)
{
  GovernanceState g;
  g.owner = owner;
  return g;
}

FactoryState make_factory(BigInt const &owner, Address const &governance, Policy const &policy)
{
  FactoryState f;
  f.owner      = owner;
  f.governance = governance;
  f.policy     = policy;
  return f;
}

}  // namespace hygiea::contracts
