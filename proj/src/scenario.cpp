#include "hygiea/scenario.hpp"

#include "hygiea/analytics.hpp"
#include "hygiea/protocols.hpp"

#include <cstdio>
#include <memory>

namespace hygiea::scenario {
namespace {

using nlohmann::json;
using namespace hygiea::protocols;

std::string need_string(json const &j, char const *key)
{
  if (!j.contains(key) || !j.at(key).is_string())
  {
    throw ScriptError(std::string("expected string field '") + key + "'");
  }
  return j.at(key).get<std::string>();
}

std::optional<std::string> opt_string(json const &j, char const *key)
{
  if (!j.contains(key))
  {
    return std::nullopt;
  }
  return need_string(j, key);
}

std::uint64_t need_u64(json const &j, char const *key)
{
  if (!j.contains(key) || !j.at(key).is_number_unsigned())
  {
    throw ScriptError(std::string("expected unsigned integer field '") + key + "'");
  }
  return j.at(key).get<std::uint64_t>();
}

std::uint64_t opt_u64(json const &j, char const *key, std::uint64_t fallback)
{
  return j.contains(key) ? need_u64(j, key) : fallback;
}

bool opt_bool(json const &j, char const *key, bool fallback)
{
  if (!j.contains(key))
  {
    return fallback;
  }
  if (!j.at(key).is_boolean())
  {
    throw ScriptError(std::string("expected boolean field '") + key + "'");
  }
  return j.at(key).get<bool>();
}

// "fail" matches "fail(issuer inactive)"; otherwise exact.
bool matches(std::string const &expected, std::string const &actual)
{
  if (expected == actual)
  {
    return true;
  }
  return expected.find('(') == std::string::npos && actual.rfind(expected + "(", 0) == 0;
}

std::string outcome_of(ProtocolResult const &r)
{
  return r.ok ? "ok" : "fail(" + r.reason + ")";
}

std::string outcome_of(VerificationVerdict const &v)
{
  return v.outcome == Verdict::Accept ? "Accept"
                                      : "Reject(" + std::string(to_string(v.reason)) + ")";
}

class Runner
{
public:
  Runner(json const &script, std::uint64_t seed)
    : script_(script)
    , seed_(seed)
  {}

  Report run()
  {
    if (!script_.is_object())
    {
      throw ScriptError("scenario must be a JSON object");
    }
    setup();
    auto const &actions = script_.contains("actions") ? script_.at("actions") : json::array();
    if (!actions.is_array())
    {
      throw ScriptError("'actions' must be an array");
    }
    for (std::size_t i = 0; i < actions.size() && report_.passed(); ++i)
    {
      step(i, actions[i]);
    }
    if (report_.passed() && script_.contains("assertions"))
    {
      auto const &asserts = script_.at("assertions");
      if (!asserts.is_array())
      {
        throw ScriptError("'assertions' must be an array");
      }
      for (std::size_t i = 0; i < asserts.size() && report_.passed(); ++i)
      {
        check(i, asserts[i]);
      }
    }
    finish();
    return std::move(report_);
  }

private:
  void setup()
  {
    auto group = group_from_json(script_.contains("group") ? script_.at("group") : json("test"));
    crypto::Rng key_rng(seed_);

    if (!script_.contains("parties") || !script_.at("parties").is_array())
    {
      throw ScriptError("'parties' must be an array");
    }
    std::optional<BigInt> gb_sk;
    for (auto const &p : script_.at("parties"))
    {
      Party party;
      party.id = need_string(p, "id");
      try
      {
        party.role = role_from_string(need_string(p, "role"));
      }
      catch (DecodeError const &e)
      {
        throw ScriptError(e.what());
      }
      BigInt sk;
      if (p.contains("secret"))
      {
        try
        {
          sk = ledger::big_from_hex(need_string(p, "secret"));
        }
        catch (DecodeError const &e)
        {
          throw ScriptError(e.what());
        }
        if (sk <= 0 || sk >= group.q)
        {
          throw ScriptError("secret of " + party.id + " out of range");
        }
      }
      else if (p.contains("key_seed"))
      {
        crypto::Rng r(need_u64(p, "key_seed"));
        sk = r.nonzero_scalar(group.q);
      }
      else
      {
        sk = key_rng.nonzero_scalar(group.q);
      }
      party.keys = crypto::keypair_from_secret(group, sk);
      if (p.contains("identity"))
      {
        auto const &id = p.at("identity");
        if (!id.is_object())
        {
          throw ScriptError("identity must be an object of strings");
        }
        for (auto const &[k, v] : id.items())
        {
          if (!v.is_string())
          {
            throw ScriptError("identity must be an object of strings");
          }
          party.civil_identity[k] = v.get<std::string>();
        }
      }
      if (auto b = opt_string(p, "binding"))
      {
        try
        {
          party.binding = crypto::binding_mechanism_from_string(*b);
        }
        catch (crypto::BindingError const &e)
        {
          throw ScriptError(e.what());
        }
      }
      if (party.role == Role::GoverningBody)
      {
        if (gb_sk)
        {
          throw ScriptError("exactly one GoverningBody party is allowed");
        }
        gb_sk = sk;
      }
      if (!parties_.emplace(party.id, party).second)
      {
        throw ScriptError("duplicate party id: " + party.id);
      }
    }
    if (!gb_sk)
    {
      throw ScriptError("scenario needs a GoverningBody party");
    }

    ledger::GenesisConfig genesis;
    genesis.chain_name   = opt_string(script_, "chain_name").value_or("hygiea");
    genesis.genesis_time = opt_u64(script_, "genesis_time", 0);
    genesis.group        = group;
    genesis.validators   = {crypto::keypair_from_secret(group, *gb_sk).pk};
    if (script_.contains("policy"))
    {
      try
      {
        genesis.policy = contracts::policy_from_json(script_.at("policy"));
      }
      catch (DecodeError const &e)
      {
        throw ScriptError(std::string("policy: ") + e.what());
      }
    }
    ProtocolConfig config;
    config.identification_rounds =
        static_cast<unsigned>(opt_u64(script_, "identification_rounds", 0));
    config.max_snapshot_age = opt_u64(script_, "max_snapshot_age", 24 * kHour);
    consortium_ = std::make_unique<Consortium>(genesis, *gb_sk, seed_, config);
  }

  Party &party(json const &action, char const *key)
  {
    auto id = need_string(action, key);
    auto it = parties_.find(id);
    if (it == parties_.end())
    {
      throw ScriptError("undeclared party: " + id);
    }
    return it->second;
  }

  Address certificate(std::string const &label) const
  {
    auto it = certs_.find(label);
    if (it == certs_.end())
    {
      throw ScriptError("unknown certificate label: " + label);
    }
    return it->second;
  }

  Address address(std::string const &name) const
  {
    if (name == "governance")
    {
      return consortium_->chain().governance_address();
    }
    if (name == "factory")
    {
      return consortium_->chain().factory_address();
    }
    if (auto it = certs_.find(name); it != certs_.end())
    {
      return it->second;
    }
    try
    {
      return Address::from_hex(name);
    }
    catch (DecodeError const &)
    {
      throw ScriptError("unknown address: " + name);
    }
  }

  ProverConduct prover_conduct(json const &a)
  {
    ProverConduct c;
    if (a.contains("claim_key_of"))
    {
      c.claimed_pk = party(a, "claim_key_of").keys.pk;
    }
    if (a.contains("prove_with_key_of"))
    {
      c.proving_sk = party(a, "prove_with_key_of").keys.sk;
    }
    if (opt_bool(a, "replay", false) && c.claimed_pk)
    {
      for (auto const &t : consortium_->observed())
      {
        if (t.pk == *c.claimed_pk)
        {
          c.replay.push_back(t);
        }
      }
    }
    return c;
  }

  HolderConduct holder_conduct(json const &a)
  {
    HolderConduct c;
    c.prover = prover_conduct(a);
    if (a.contains("present_binding_of"))
    {
      auto const &other   = party(a, "present_binding_of");
      c.presented_binding = crypto::bind_identity(other.civil_identity, other.binding);
    }
    if (a.contains("present_certificate"))
    {
      c.presented_certificate = certificate(need_string(a, "present_certificate"));
    }
    if (a.contains("document_of"))
    {
      c.document = party(a, "document_of").civil_identity;
    }
    return c;
  }

  analytics::HealthRecord record(json const &a, bool consent)
  {
    json r = a.at("record");
    if (r.is_object() && !r.contains("consent"))
    {
      r["consent"] = consent;
    }
    try
    {
      return analytics::record_from_json(r);
    }
    catch (analytics::ValidationError const &e)
    {
      throw ScriptError(std::string("record: ") + e.what());
    }
  }

  void step(std::size_t index, json const &a)
  {
    if (!a.is_object())
    {
      throw ScriptError("action " + std::to_string(index) + " is not an object");
    }
    auto        kind = need_string(a, "action");
    auto       &c    = *consortium_;
    std::string summary;
    std::string outcome = "ok";

    try
    {
      if (kind == "register")
      {
        auto               &p = party(a, "party");
        RegistrationRequest req;
        req.role       = p.role;
        req.country    = opt_string(a, "country").value_or("XX");
        req.name       = opt_string(a, "name").value_or(p.id);
        req.id         = opt_string(a, "id").value_or(p.id);
        req.valid_from = opt_u64(a, "valid_from", c.now());
        if (a.contains("allowed_types"))
        {
          for (auto const &t : a.at("allowed_types"))
          {
            req.allowed_types.insert(contracts::cert_type_from_string(t.get<std::string>()));
          }
        }
        if (auto lc = opt_string(a, "logging_class"))
        {
          req.logging_class = contracts::logging_class_from_string(*lc);
        }
        auto r  = run_registration(c, p, req, prover_conduct(a));
        outcome = outcome_of(r);
        summary = "register " + p.id;
      }
      else if (kind == "issue")
      {
        auto           &issuer = party(a, "issuer");
        auto           &holder = party(a, "holder");
        IssuanceRequest req;
        req.cert_type = contracts::cert_type_from_string(need_string(a, "cert_type"));
        req.consent   = opt_bool(a, "consent", false);
        if (a.contains("record"))
        {
          req.clinical = record(a, req.consent);
        }
        auto r  = run_issuance(c, issuer, holder, req, holder_conduct(a));
        outcome = outcome_of(r);
        summary = "issue " + std::string(contracts::to_string(req.cert_type)) + " " + issuer.id +
                  " -> " + holder.id;
        if (r.address)
        {
          summary += " at " + r.address->hex();
          if (auto label = opt_string(a, "label"))
          {
            certs_[*label] = *r.address;
          }
        }
      }
      else if (kind == "verify")
      {
        auto &verifier = party(a, "verifier");
        auto &holder   = party(a, "holder");
        auto  cert     = certificate(need_string(a, "certificate"));
        auto  mode     = mode_from_string(opt_string(a, "mode").value_or("Online"));
        OfflineCache const *cache = nullptr;
        if (auto label = opt_string(a, "snapshot"))
        {
          auto it = snapshots_.find(*label);
          if (it == snapshots_.end())
          {
            throw ScriptError("unknown snapshot label: " + *label);
          }
          cache = &it->second;
        }
        auto v  = run_verification(c, verifier, holder, cert, mode, cache, holder_conduct(a));
        outcome = outcome_of(v);
        summary = "verify " + need_string(a, "certificate") + " by " + verifier.id + " for " +
                  holder.id + " " + std::string(to_string(mode));
        if (v.logged)
        {
          summary += " (logged)";
        }
        auto line      = to_json(v);
        line["action"] = index;
        line["verifier"]    = verifier.id;
        line["holder"]      = holder.id;
        line["certificate"] = cert.hex();
        report_.verdicts += line.dump() + "\n";
      }
      else if (kind == "revoke")
      {
        auto label = need_string(a, "certificate");
        outcome    = outcome_of(revoke_certificate(c, certificate(label)));
        summary    = "revoke " + label;
      }
      else if (kind == "set_status")
      {
        auto &p     = party(a, "party");
        auto status = contracts::role_status_from_string(need_string(a, "status"));
        outcome     = outcome_of(set_role_status(c, p.keys.pk, status));
        summary     = "set_status " + p.id + " " + std::string(contracts::to_string(status));
      }
      else if (kind == "seal")
      {
        auto const &b = c.seal();
        summary       = "seal block " + std::to_string(b.height);
      }
      else if (kind == "advance_time")
      {
        Timestamp dt = opt_u64(a, "seconds", 0) + opt_u64(a, "hours", 0) * kHour +
                       opt_u64(a, "days", 0) * kDay;
        c.advance_time(dt);
        summary = "advance_time " + std::to_string(dt) + "s to " + std::to_string(c.now());
      }
      else if (kind == "ingest")
      {
        auto stored = c.health_records().ingest(record(a, true));
        outcome     = stored ? "ok" : "fail(no consent)";
        summary     = "ingest";
      }
      else if (kind == "snapshot")
      {
        auto label        = need_string(a, "label");
        snapshots_[label] = export_offline_cache(c.chain());
        summary           = "snapshot " + label + " (" +
                  std::to_string(snapshots_[label].snapshot.revoked.size()) + " revoked)";
      }
      else if (kind == "faults")
      {
        FaultConfig f;
        f.drop    = a.value("drop", 0.0);
        f.reorder = a.value("reorder", 0.0);
        c.channel().set_faults(f);
        summary = "faults";
      }
      else
      {
        throw ScriptError("unknown action: " + kind);
      }
    }
    catch (DecodeError const &e)
    {
      throw ScriptError("action " + std::to_string(index) + ": " + e.what());
    }
    catch (json::exception const &e)
    {
      throw ScriptError("action " + std::to_string(index) + ": " + e.what());
    }
    catch (ledger::SealRefused const &e)
    {
      outcome = std::string("fail(") + e.what() + ")";
    }

    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "[%03zu] ", index);
    std::string line = prefix + summary + " -> " + outcome;
    if (a.contains("expect"))
    {
      auto expected = need_string(a, "expect");
      if (!matches(expected, outcome))
      {
        line += "  EXPECTED " + expected;
        report_.failed_action = index;
        report_.failure       = "action " + std::to_string(index) + ": expected " + expected +
                          ", got " + outcome;
      }
    }
    report_.lines.push_back(std::move(line));
  }

  void check(std::size_t index, json const &a)
  {
    auto const &chain = consortium_->chain();
    std::string what;
    bool        ok = false;
    if (a.contains("query"))
    {
      auto const &q   = a.at("query");
      auto        sel = need_string(q, "selector");
      auto        at  = need_string(q, "address");
      what            = "query " + at + "." + sel;
      json value;
      try
      {
        value = chain.query(address(at), sel);
      }
      catch (std::exception const &e)
      {
        value = json{{"error", e.what()}};
      }
      if (a.contains("length"))
      {
        ok = value.is_array() && value.size() == need_u64(a, "length");
      }
      else
      {
        ok = a.contains("equals") && value == a.at("equals");
      }
      what += " = " + value.dump();
    }
    else if (a.contains("chain_valid"))
    {
      auto v = ledger::verify_chain(chain);
      ok     = (!v) == opt_bool(a, "chain_valid", true);
      what   = "chain_valid " + std::string(v ? std::string(to_string(v->kind)) : "ok");
    }
    else if (a.contains("wallet"))
    {
      auto &p = party(a, "wallet");
      ok      = p.wallet.size() == need_u64(a, "size");
      what    = "wallet " + p.id + " size " + std::to_string(p.wallet.size());
    }
    else if (a.contains("records"))
    {
      auto n = consortium_->health_records().size();
      ok     = n == need_u64(a, "records");
      what   = "records " + std::to_string(n);
    }
    else
    {
      throw ScriptError("assertion " + std::to_string(index) + " has no known check");
    }
    report_.lines.push_back("assert[" + std::to_string(index) + "] " + what + " -> " +
                            (ok ? "pass" : "FAIL"));
    if (!ok)
    {
      report_.failed_assertion = index;
      report_.failure          = "assertion " + std::to_string(index) + " failed: " + what;
    }
  }

  void finish()
  {
    auto &c        = *consortium_;
    report_.chain  = ledger::export_files(c.chain());
    auto const &rs = c.health_records().records();
    report_.analytics["records.jsonl"]    = analytics::to_jsonl(c.health_records());
    report_.analytics["distribution.csv"] = analytics::distribution_csv(analytics::symptom_distribution(rs));
    report_.analytics["regions.csv"]      = analytics::regions_csv(analytics::regional_comparison(rs));
    auto series = analytics::case_series(rs, "");
    report_.analytics["cases.csv"] = analytics::series_csv(series);
    if (series.counts.size() >= 5)
    {
      analytics::FitConfig fc;
      fc.N  = static_cast<double>(opt_u64(script_, "population", 1000));
      fc.I0 = 1;
      report_.analytics["fit.json"] = analytics::to_json(analytics::sir_fit(series, fc)).dump() + "\n";
    }
  }

  json const                         &script_;
  std::uint64_t                       seed_;
  std::unique_ptr<Consortium>         consortium_;
  std::map<std::string, Party>        parties_;
  std::map<std::string, Address>      certs_;
  std::map<std::string, OfflineCache> snapshots_;
  Report                              report_;
};

}  // namespace

std::string Report::text() const
{
  std::string out;
  for (auto const &l : lines)
  {
    out += l + "\n";
  }
  out += passed() ? "result: PASS\n" : "result: FAIL " + failure + "\n";
  return out;
}

crypto::GroupParams group_from_json(json const &j)
{
  if (j.is_string())
  {
    auto name = j.get<std::string>();
    if (name == "test")
    {
      return crypto::GroupParams::test();
    }
    if (name == "modp2048")
    {
      return crypto::GroupParams::modp2048();
    }
    throw ScriptError("unknown group preset: " + name);
  }
  if (!j.is_object() || j.size() != 3 || !j.contains("p") || !j.contains("q") || !j.contains("g"))
  {
    throw ScriptError("group must be a preset name or {p, q, g} in hex");
  }
  crypto::GroupParams g;
  try
  {
    g.p = ledger::big_from_hex(need_string(j, "p"));
    g.q = ledger::big_from_hex(need_string(j, "q"));
    g.g = ledger::big_from_hex(need_string(j, "g"));
    g.validate();
  }
  catch (std::exception const &e)
  {
    throw ScriptError(std::string("group: ") + e.what());
  }
  return g;
}

Report run(json const &script, std::uint64_t seed)
{
  return Runner(script, seed).run();
}

}  // namespace hygiea::scenario
