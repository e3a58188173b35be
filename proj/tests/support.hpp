#pragma once

#include "hygiea/protocols.hpp"

#include <memory>
#include <string>

namespace hygiea::fixture {

using crypto::BigInt;
using crypto::GroupParams;
using protocols::Party;
using protocols::Role;

// 512-bit p, 256-bit q (tests/oracles/desk_group.py). Large enough that
// signatures and identification are not forgeable by luck, small enough to
// keep exhaustive sweeps fast.
inline GroupParams desk_group()
{
  GroupParams g;
  g.p = BigInt("800000000000000000000000000000000000000000000000000000000000024b2acd5e8ee2b787f88b"
               "7bea9fee60967318987972b2d350f2417662d63d7dbeab",
               16);
  g.q = BigInt("9baab628f4631e55bf25047d065741d49c6fbfdd2c2ef8365fea02bb66a64bf9", 16);
  g.g = BigInt("7bc4848b40c393c9d4ebd97c90753871ba7e435a0e6eeeb1f45e275bf20da399c02974d3a17e4b7a"
               "0de09f998b57d4bfa840c69c2f74af1388fcd223085d91f5",
               16);
  return g;
}

inline constexpr Timestamp kGenesisTime = 1609459200;  // 2021-01-01

inline FieldMap identity(std::string name, std::string surname, std::string doc,
                         std::string dob)
{
  return {{"name", std::move(name)},
          {"surname", std::move(surname)},
          {"doc", std::move(doc)},
          {"dob", std::move(dob)}};
}

inline Party make_party(GroupParams const &params, std::string id, Role role, BigInt const &sk,
                        FieldMap civil = {})
{
  Party p;
  p.id             = std::move(id);
  p.role           = role;
  p.keys           = crypto::keypair_from_secret(params, sk);
  p.civil_identity = std::move(civil);
  return p;
}

inline ledger::GenesisConfig genesis_for(GroupParams const &params, BigInt const &gb_sk)
{
  ledger::GenesisConfig c;
  c.chain_name   = "hygiea-test";
  c.genesis_time = kGenesisTime;
  c.group        = params;
  c.validators   = {crypto::keypair_from_secret(params, gb_sk).pk};
  return c;
}

// A consortium with one lab (Test, Recovery), one clinic (Vaccination), a
// StateUpdating and a ReadOnly verifier, and three holders. In the TEST
// group every party has its own secret (only ten keys exist there).
struct World
{
  GroupParams                              params;
  std::unique_ptr<protocols::Consortium>   c;
  Party                                    lab, clinic, border, cafe, maria, nikos, eleni;

  explicit World(GroupParams g, std::uint64_t seed = 1, unsigned rounds = 24)
    : params(std::move(g))
  {
    bool small = params.q < 1000;
    auto key   = [&](unsigned n) {
      if (small)
      {
        return BigInt(n);
      }
      crypto::Rng r(1000 + n);
      return r.nonzero_scalar(params.q);
    };
    protocols::ProtocolConfig pc;
    pc.identification_rounds = small ? rounds : 0;
    c = std::make_unique<protocols::Consortium>(genesis_for(params, key(1)), key(1), seed, pc);
    lab    = make_party(params, "lab", Role::Issuer, key(2));
    clinic = make_party(params, "clinic", Role::Issuer, key(3));
    border = make_party(params, "border", Role::Verifier, key(4));
    cafe   = make_party(params, "cafe", Role::Verifier, key(5));
    maria  = make_party(params, "maria", Role::Holder, key(6),
                        identity("Maria", "Kyriacou", "K1234567", "1990-01-02"));
    nikos  = make_party(params, "nikos", Role::Holder, key(7),
                        identity("Nikos", "Georgiou", "K7654321", "1985-06-30"));
    eleni  = make_party(params, "eleni", Role::Holder, key(8),
                        identity("Eleni", "Ioannou", "K1111111", "1972-11-15"));
  }

  protocols::ProtocolResult register_issuer(Party const &p, std::set<contracts::CertType> types)
  {
    protocols::RegistrationRequest r;
    r.role          = Role::Issuer;
    r.country       = "CY";
    r.name          = p.id;
    r.id            = p.id + "-id";
    r.allowed_types = std::move(types);
    r.valid_from    = c->now();
    return protocols::run_registration(*c, p, r);
  }

  protocols::ProtocolResult register_verifier(Party const &p, contracts::LoggingClass cls)
  {
    protocols::RegistrationRequest r;
    r.role          = Role::Verifier;
    r.country       = "CY";
    r.name          = p.id;
    r.id            = p.id + "-id";
    r.valid_from    = c->now();
    r.logging_class = cls;
    return protocols::run_registration(*c, p, r);
  }

  // Registers every issuer and verifier.
  void onboard()
  {
    using contracts::CertType;
    register_issuer(lab, {CertType::Test, CertType::Recovery});
    register_issuer(clinic, {CertType::Vaccination});
    register_verifier(border, contracts::LoggingClass::StateUpdating);
    register_verifier(cafe, contracts::LoggingClass::ReadOnly);
  }

  Address issue(Party const &issuer, Party &holder, contracts::CertType type,
                protocols::HolderConduct const &conduct = {})
  {
    protocols::IssuanceRequest req;
    req.cert_type = type;
    auto r        = protocols::run_issuance(*c, issuer, holder, req, conduct);
    if (!r.ok || !r.address)
    {
      throw std::runtime_error("issuance failed: " + r.reason);
    }
    return *r.address;
  }

  protocols::VerificationVerdict verify(Party const &verifier, Party const &holder,
                                        Address const &cert,
                                        protocols::Mode mode = protocols::Mode::Online,
                                        protocols::OfflineCache const *cache = nullptr,
                                        protocols::HolderConduct const &conduct = {})
  {
    return protocols::run_verification(*c, verifier, holder, cert, mode, cache, conduct);
  }
};

}  // namespace hygiea::fixture
