#include "hygiea/contracts.hpp"

#include <initializer_list>

namespace hygiea::contracts {
namespace {

using nlohmann::json;
using crypto::element_from_hex;
using crypto::element_to_hex;
using crypto::signature_from_hex;
using crypto::signature_to_hex;

void expect_keys(json const &j, std::initializer_list<char const *> keys)
{
  if (!j.is_object() || j.size() != keys.size())
  {
    throw DecodeError("unexpected object shape");
  }
  for (auto const *k : keys)
  {
    if (!j.contains(k))
    {
      throw DecodeError(std::string("missing key: ") + k);
    }
  }
}

std::string str(json const &j, char const *key)
{
  auto const &v = j.at(key);
  if (!v.is_string())
  {
    throw DecodeError(std::string("expected string: ") + key);
  }
  return v.get<std::string>();
}

std::uint64_t u64(json const &j, char const *key)
{
  auto const &v = j.at(key);
  if (!v.is_number_unsigned())
  {
    throw DecodeError(std::string("expected unsigned integer: ") + key);
  }
  return v.get<std::uint64_t>();
}

json const &arr(json const &j, char const *key)
{
  auto const &v = j.at(key);
  if (!v.is_array())
  {
    throw DecodeError(std::string("expected array: ") + key);
  }
  return v;
}

std::string as_string(json const &v)
{
  if (!v.is_string())
  {
    throw DecodeError("expected string");
  }
  return v.get<std::string>();
}

json addresses_to_json(std::vector<Address> const &list)
{
  json out = json::array();
  for (auto const &a : list)
  {
    out.push_back(a.hex());
  }
  return out;
}

std::vector<Address> addresses_from_json(json const &j)
{
  std::vector<Address> out;
  for (auto const &v : j)
  {
    out.push_back(Address::from_hex(as_string(v)));
  }
  return out;
}

json issuer_to_json(GroupParams const &params, IssuerRecord const &r)
{
  json types = json::array();
  for (auto t : r.allowed_types)
  {
    types.push_back(std::string(to_string(t)));
  }
  return json{{"country", r.country},
              {"name", r.name},
              {"id", r.id},
              {"allowed_types", types},
              {"valid_from", r.valid_from},
              {"status", std::string(to_string(r.status))},
              {"pk", element_to_hex(params, r.pk)},
              {"attestation", signature_to_hex(params, r.attestation)}};
}

IssuerRecord issuer_from_json(GroupParams const &params, json const &j)
{
  expect_keys(j, {"country", "name", "id", "allowed_types", "valid_from", "status", "pk",
                  "attestation"});
  IssuerRecord r;
  r.country = str(j, "country");
  r.name    = str(j, "name");
  r.id      = str(j, "id");
  for (auto const &t : arr(j, "allowed_types"))
  {
    r.allowed_types.insert(cert_type_from_string(as_string(t)));
  }
  r.valid_from  = u64(j, "valid_from");
  r.status      = role_status_from_string(str(j, "status"));
  r.pk          = element_from_hex(params, str(j, "pk"));
  r.attestation = signature_from_hex(params, str(j, "attestation"));
  return r;
}

json verifier_to_json(GroupParams const &params, VerifierRecord const &r)
{
  return json{{"country", r.country},
              {"name", r.name},
              {"id", r.id},
              {"valid_from", r.valid_from},
              {"status", std::string(to_string(r.status))},
              {"logging_class", std::string(to_string(r.logging_class))},
              {"pk", element_to_hex(params, r.pk)},
              {"attestation", signature_to_hex(params, r.attestation)}};
}

VerifierRecord verifier_from_json(GroupParams const &params, json const &j)
{
  expect_keys(j, {"country", "name", "id", "valid_from", "status", "logging_class", "pk",
                  "attestation"});
  VerifierRecord r;
  r.country       = str(j, "country");
  r.name          = str(j, "name");
  r.id            = str(j, "id");
  r.valid_from    = u64(j, "valid_from");
  r.status        = role_status_from_string(str(j, "status"));
  r.logging_class = logging_class_from_string(str(j, "logging_class"));
  r.pk            = element_from_hex(params, str(j, "pk"));
  r.attestation   = signature_from_hex(params, str(j, "attestation"));
  return r;
}

}  // namespace

json to_json(GroupParams const &params, ContractState const &state)
{
  return std::visit(
      [&](auto const &s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GovernanceState>)
        {
          json events = json::array();
          for (auto const &e : s.events)
          {
            events.push_back(json{{"kind", e.kind}, {"subject", e.subject}});
          }
          auto reg = to_json(params, s.registry);
          return json{{"kind", "governance"},
                      {"owner", element_to_hex(params, s.owner)},
                      {"issuers", reg.at("issuers")},
                      {"verifiers", reg.at("verifiers")},
                      {"revoked", addresses_to_json(s.revoked)},
                      {"events", events}};
        }
        else if constexpr (std::is_same_v<T, FactoryState>)
        {
          return json{{"kind", "factory"},
                      {"owner", element_to_hex(params, s.owner)},
                      {"governance", s.governance.hex()},
                      {"policy", to_json(s.policy)},
                      {"issued", addresses_to_json(s.issued)}};
        }
        else
        {
          json log = json::array();
          for (auto const &e : s.verification_log)
          {
            log.push_back(
                json{{"verifier", element_to_hex(params, e.verifier)}, {"timestamp", e.timestamp}});
          }
          return json{{"kind", "certificate"},
                      {"certificate", to_json(params, s.cert)},
                      {"verification_log", log}};
        }
      },
      state);
}

namespace {

ContractState contract_from_json(GroupParams const &params, json const &j)
{
  if (!j.is_object() || !j.contains("kind"))
  {
    throw DecodeError("contract without kind");
  }
  auto kind = str(j, "kind");
  if (kind == "governance")
  {
    expect_keys(j, {"kind", "owner", "issuers", "verifiers", "revoked", "events"});
    GovernanceState g;
    g.owner    = element_from_hex(params, str(j, "owner"));
    g.registry = registry_from_json(
        params, json{{"issuers", arr(j, "issuers")}, {"verifiers", arr(j, "verifiers")}});
    g.revoked = addresses_from_json(arr(j, "revoked"));
    for (auto const &e : arr(j, "events"))
    {
      expect_keys(e, {"kind", "subject"});
      g.events.push_back({str(e, "kind"), str(e, "subject")});
    }
    return g;
  }
  if (kind == "factory")
  {
    expect_keys(j, {"kind", "owner", "governance", "policy", "issued"});
    FactoryState f;
    f.owner      = element_from_hex(params, str(j, "owner"));
    f.governance = Address::from_hex(str(j, "governance"));
    f.policy     = policy_from_json(j.at("policy"));
    f.issued     = addresses_from_json(arr(j, "issued"));
    return f;
  }
  if (kind == "certificate")
  {
    expect_keys(j, {"kind", "certificate", "verification_log"});
    CertificateState c;
    c.cert = certificate_from_json(params, j.at("certificate"));
    for (auto const &e : arr(j, "verification_log"))
    {
      expect_keys(e, {"verifier", "timestamp"});
      c.verification_log.push_back(
          {element_from_hex(params, str(e, "verifier")), u64(e, "timestamp")});
    }
    return c;
  }
  throw DecodeError("unknown contract kind: " + kind);
}

}  // namespace

json to_json(Policy const &policy)
{
  return json{{"test_validity", policy.test_validity},
              {"recovery_validity", policy.recovery_validity},
              {"vaccination_validity", policy.vaccination_validity},
              {"vaccination_delay", policy.vaccination_delay}};
}

Policy policy_from_json(json const &j)
{
  expect_keys(j, {"test_validity", "recovery_validity", "vaccination_validity",
                  "vaccination_delay"});
  Policy p;
  p.test_validity        = u64(j, "test_validity");
  p.recovery_validity    = u64(j, "recovery_validity");
  p.vaccination_validity = u64(j, "vaccination_validity");
  p.vaccination_delay    = u64(j, "vaccination_delay");
  return p;
}

json to_json(GroupParams const &params, Registry const &registry)
{
  json issuers   = json::array();
  json verifiers = json::array();
  for (auto const &[pk, r] : registry.issuers)
  {
    issuers.push_back(issuer_to_json(params, r));
  }
  for (auto const &[pk, r] : registry.verifiers)
  {
    verifiers.push_back(verifier_to_json(params, r));
  }
  return json{{"issuers", issuers}, {"verifiers", verifiers}};
}

Registry registry_from_json(GroupParams const &params, json const &j)
{
  expect_keys(j, {"issuers", "verifiers"});
  Registry r;
  for (auto const &v : arr(j, "issuers"))
  {
    auto rec = issuer_from_json(params, v);
    auto pk  = rec.pk;
    if (!r.issuers.emplace(pk, std::move(rec)).second)
    {
      throw DecodeError("duplicate issuer");
    }
  }
  for (auto const &v : arr(j, "verifiers"))
  {
    auto rec = verifier_from_json(params, v);
    auto pk  = rec.pk;
    if (!r.verifiers.emplace(pk, std::move(rec)).second)
    {
      throw DecodeError("duplicate verifier");
    }
  }
  return r;
}

json to_json(GroupParams const &params, Certificate const &c)
{
  return json{{"binding",
               json{{"mechanism", std::string(crypto::to_string(c.personal_identifier.mechanism))},
                    {"payload", to_hex(c.personal_identifier.payload)}}},
              {"cert_type", std::string(to_string(c.cert_type))},
              {"issuance_date", c.issuance_date},
              {"valid_from", c.valid_from},
              {"expiry_date", c.expiry_date},
              {"issuer_pk", element_to_hex(params, c.issuer_pk)},
              {"governance_address", c.governance_address.hex()},
              {"status_flag", std::string(to_string(c.status_flag))},
              {"issuer_signature", signature_to_hex(params, c.issuer_signature)},
              {"holder_pk", element_to_hex(params, c.holder_pk)}};
}

Certificate certificate_from_json(GroupParams const &params, json const &j)
{
  expect_keys(j, {"binding", "cert_type", "issuance_date", "valid_from", "expiry_date",
                  "issuer_pk", "governance_address", "status_flag", "issuer_signature",
                  "holder_pk"});
  Certificate c;
  auto const &b = j.at("binding");
  expect_keys(b, {"mechanism", "payload"});
  try
  {
    c.personal_identifier.mechanism = crypto::binding_mechanism_from_string(str(b, "mechanism"));
  }
  catch (crypto::BindingError const &e)
  {
    throw DecodeError(e.what());
  }
  c.personal_identifier.payload = from_hex(str(b, "payload"));
  c.cert_type                   = cert_type_from_string(str(j, "cert_type"));
  c.issuance_date               = u64(j, "issuance_date");
  c.valid_from                  = u64(j, "valid_from");
  c.expiry_date                 = u64(j, "expiry_date");
  c.issuer_pk                   = element_from_hex(params, str(j, "issuer_pk"));
  c.governance_address          = Address::from_hex(str(j, "governance_address"));
  c.status_flag                 = status_flag_from_string(str(j, "status_flag"));
  c.issuer_signature            = signature_from_hex(params, str(j, "issuer_signature"));
  c.holder_pk                   = element_from_hex(params, str(j, "holder_pk"));
  return c;
}

json to_json(GroupParams const &params, ContractStore const &store)
{
  json out = json::object();
  for (auto const &[addr, state] : store)
  {
    out[addr.hex()] = to_json(params, state);
  }
  return out;
}

ContractStore store_from_json(GroupParams const &params, json const &j)
{
  if (!j.is_object())
  {
    throw DecodeError("contract store must be an object");
  }
  ContractStore store;
  for (auto const &[key, value] : j.items())
  {
    store.emplace(Address::from_hex(key), contract_from_json(params, value));
  }
  return store;
}

Digest state_root(GroupParams const &params, ContractStore const &store)
{
  return crypto::hash_digest(to_json(params, store).dump());
}

}  // namespace hygiea::contracts
