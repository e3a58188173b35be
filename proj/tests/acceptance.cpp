// Acceptance run: one line per criterion, non-zero exit if any fails.
#include "hygiea/analytics.hpp"
#include "hygiea/scenario.hpp"
#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace hygiea;
using namespace hygiea::protocols;
using contracts::CertType;
using contracts::LoggingClass;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome
{
  bool        pass{false};
  std::string detail;
};

double seconds_since(Clock::time_point start)
{
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(char const *f, auto... args)
{
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1: adversarial fuzzing ------------------------------------------------

// Honest and adversarial verification attempts in the TEST group, plus
// registration and issuance impersonation.
Outcome fuzz_protocols(std::size_t &adversarial_out, std::size_t &false_accepts_out,
                       std::size_t &honest_out, std::size_t &honest_rejects_out,
                       std::map<std::string, std::size_t> &reasons)
{
  fixture::World w(crypto::GroupParams::test(), 2024);
  w.onboard();
  std::vector<Party *>  holders{&w.maria, &w.nikos, &w.eleni};
  std::vector<Address>  certs;
  for (auto *h : holders)
  {
    certs.push_back(w.issue(w.lab, *h, CertType::Recovery));
  }
  auto revoked = w.issue(w.lab, w.eleni, CertType::Recovery);
  if (!revoke_certificate(*w.c, revoked).ok)
  {
    return {false, "setup: revocation failed"};
  }
  // warm up the transcript log so replay has material
  for (std::size_t h = 0; h < holders.size(); ++h)
  {
    w.verify(w.cafe, *holders[h], certs[h]);
  }

  std::mt19937 gen(99);
  auto         pick = [&](std::size_t n) { return static_cast<std::size_t>(gen() % n); };
  std::size_t  adversarial = 0, false_accepts = 0, honest = 0, honest_rejects = 0;
  std::vector<Party *> verifiers{&w.border, &w.cafe};
  auto const           stranger = fixture::make_party(w.params, "stranger", Role::Issuer, 9);
  auto const           spare_pk = crypto::keypair_from_secret(w.params, 10).pk;

  auto verify_maybe_offline = [&](Party const &verifier, Party const &holder, Address const &cert,
                                  HolderConduct const &conduct, bool offline) {
    VerificationVerdict v;
    if (offline)
    {
      auto cache = export_offline_cache(w.c->chain());
      v          = w.verify(verifier, holder, cert, Mode::Offline, &cache, conduct);
    }
    else
    {
      v = w.verify(verifier, holder, cert, Mode::Online, nullptr, conduct);
    }
    ++reasons[std::string(to_string(v.reason))];
    return v;
  };

  for (std::size_t i = 0; i < 1600; ++i)
  {
    auto  kind     = i % 8;
    auto &verifier = *verifiers[pick(2)];
    bool  offline  = pick(2) == 0;
    auto  v        = pick(3);
    auto  a        = (v + 1 + pick(2)) % 3;  // attacker != victim
    auto &victim   = *holders[v];
    auto &attacker = *holders[a];

    if (kind == 0 || kind == 7)
    {
      ++honest;
      auto verdict = verify_maybe_offline(verifier, victim, certs[v], {}, offline);
      honest_rejects += verdict.outcome == Verdict::Accept ? 0 : 1;
      continue;
    }

    ++adversarial;
    bool accepted = false;
    switch (kind)
    {
    case 1: {  // key substitution: attacker holds victim's documents, not the key
      HolderConduct c;
      c.prover.claimed_pk = victim.keys.pk;
      c.presented_binding = crypto::bind_identity(victim.civil_identity, victim.binding);
      c.document          = victim.civil_identity;
      accepted = verify_maybe_offline(verifier, attacker, certs[v], c, offline).outcome == Verdict::Accept;
      break;
    }
    case 2: {  // tampered view of the certificate or snapshot
      HolderConduct c;
      auto          target   = certs[v];
      auto          field    = pick(4);
      auto          atk_pk   = attacker.keys.pk;
      if (field == 3)
      {
        target = revoked;
      }
      c.tamper_view = [&, target, field, atk_pk](contracts::ContractStore &store) {
        auto &cert = std::get<contracts::CertificateState>(store.at(target)).cert;
        switch (field)
        {
        case 0: cert.holder_pk = atk_pk; break;
        case 1: cert.expiry_date += 1000 * kDay; break;
        case 2: cert.cert_type = CertType::Vaccination; break;
        default: cert.status_flag = contracts::StatusFlag::Issued; break;
        }
      };
      auto &presenter = field == 0 ? attacker : (field == 3 ? w.eleni : victim);
      if (offline && field == 3)
      {
        auto cache = export_offline_cache(w.c->chain());
        cache.snapshot.revoked.erase(revoked);
        auto vd  = w.verify(verifier, presenter, target, Mode::Offline, &cache);
        accepted = vd.outcome == Verdict::Accept;
        ++reasons[std::string(to_string(vd.reason))];
      }
      else
      {
        accepted = verify_maybe_offline(verifier, presenter, target, c, offline).outcome == Verdict::Accept;
      }
      break;
    }
    case 3: {  // replay of recorded identification rounds
      HolderConduct c;
      c.prover.claimed_pk = victim.keys.pk;
      for (auto const &t : w.c->observed())
      {
        if (t.pk == victim.keys.pk)
        {
          c.prover.replay.push_back(t);
        }
      }
      c.presented_binding = crypto::bind_identity(victim.civil_identity, victim.binding);
      c.document          = victim.civil_identity;
      accepted = verify_maybe_offline(verifier, attacker, certs[v], c, offline).outcome == Verdict::Accept;
      break;
    }
    case 4: {  // stolen certificate presented under the attacker's own key
      accepted = verify_maybe_offline(verifier, attacker, certs[v], {}, offline).outcome == Verdict::Accept;
      break;
    }
    case 5: {  // registration under a key the prover does not hold
      ProverConduct c;
      c.claimed_pk = spare_pk;
      RegistrationRequest req;
      req.role          = Role::Issuer;
      req.allowed_types = {CertType::Test};
      req.valid_from    = w.c->now();
      auto r            = run_registration(*w.c, stranger, req, c);
      accepted          = r.ok;
      ++reasons["registration: " + r.reason];
      break;
    }
    default: {  // issuance to a key the holder does not hold
      HolderConduct c;
      c.prover.claimed_pk = victim.keys.pk;
      IssuanceRequest req;
      req.cert_type = CertType::Recovery;
      auto before   = attacker.wallet.size();
      auto r        = run_issuance(*w.c, w.lab, attacker, req, c);
      accepted      = r.ok || attacker.wallet.size() != before;
      ++reasons["issuance: " + r.reason];
      break;
    }
    }
    false_accepts += accepted ? 1 : 0;
  }
  adversarial_out    = adversarial;
  false_accepts_out  = false_accepts;
  honest_out         = honest;
  honest_rejects_out = honest_rejects;
  return {false_accepts == 0 && honest_rejects == 0, ""};
}

// Signed transactions whose payload was altered after signing must not enter
// the pool. Runs in the desk group, where forging by luck is not a factor.
std::size_t fuzz_transactions(std::size_t trials)
{
  auto        params = fixture::desk_group();
  crypto::Rng rng(31);
  auto        gb    = crypto::keygen(params, rng);
  auto        chain = ledger::ChainState::genesis(fixture::genesis_for(params, gb.sk));
  std::mt19937 gen(7);
  std::size_t  admitted = 0;
  for (std::size_t i = 0; i < trials; ++i)
  {
    contracts::IssuerRecord rec;
    rec.country       = "CY";
    rec.name          = "Lab " + std::to_string(i);
    rec.id            = "L" + std::to_string(i);
    rec.allowed_types = {CertType::Test};
    rec.valid_from    = fixture::kGenesisTime;
    rec.pk            = crypto::keygen(params, rng).pk;
    rec.attestation   = contracts::attest(params, gb.sk, rec, rng);
    auto call = contracts::calls::register_issuer(params, chain.governance_address(), rec);
    auto tx   = ledger::make_transaction(params, gb.sk, chain.next_nonce(gb.pk), call, rng);

    auto mutated = tx;
    switch (gen() % 4)
    {
    case 0: mutated.nonce += 1; break;
    case 1: mutated.payload.method += "x"; break;
    case 2: mutated.signature.z = (mutated.signature.z + 1) % params.q; break;
    default: {
      auto it = mutated.payload.args.begin();
      std::advance(it, gen() % mutated.payload.args.size());
      auto &value = it->second;
      if (value.empty())
      {
        value = "0";
      }
      else
      {
        auto pos   = gen() % value.size();
        value[pos] = value[pos] == '1' ? '2' : '1';
      }
    }
    }
    try
    {
      chain.submit(mutated);
      ++admitted;
    }
    catch (ledger::TxRejected const &)
    {
    }
  }
  return admitted;
}

Outcome criterion1()
{
  auto        start = Clock::now();
  std::size_t adversarial = 0, false_accepts = 0, honest = 0, honest_rejects = 0;
  std::map<std::string, std::size_t> reasons;
  auto r = fuzz_protocols(adversarial, false_accepts, honest, honest_rejects, reasons);
  double      elapsed = seconds_since(start);
  auto        admitted = fuzz_transactions(300);
  bool pass = r.pass && adversarial >= 1000 && elapsed < 60 && admitted == 0 && r.detail.empty();
  if (!r.detail.empty())
  {
    return {false, r.detail};
  }
  std::string hist;
  for (auto const &[reason, n] : reasons)
  {
    hist += (hist.empty() ? "" : ", ") + reason + " " + std::to_string(n);
  }
  return {pass, fmt("%zu adversarial, %zu accepted; %zu honest, %zu rejected; %.1fs; "
                    "300 mutated txs, %zu admitted",
                    adversarial, false_accepts, honest, honest_rejects, elapsed, admitted) +
                    " [" + hist + "]"};
}

// ---- 2: revocation, online vs offline ---------------------------------------

Outcome criterion2()
{
  std::ifstream     in(std::string(SCENARIO_DIR) + "/revocation.json");
  std::stringstream ss;
  ss << in.rdbuf();
  auto report = scenario::run(nlohmann::json::parse(ss.str()), 1);

  // the same contrast driven directly, checking the block height
  fixture::World w(fixture::desk_group(), 5);
  w.onboard();
  auto addr  = w.issue(w.lab, w.maria, CertType::Test);
  auto cache = export_offline_cache(w.c->chain());
  w.c->advance_time(kHour);
  bool revoked = revoke_certificate(*w.c, addr).ok;
  auto height  = w.c->chain().head().height;
  auto online  = w.verify(w.cafe, w.maria, addr);
  auto offline = w.verify(w.cafe, w.maria, addr, Mode::Offline, &cache);
  bool same_block = w.c->chain().head().height == height;  // ReadOnly verifier writes nothing

  bool pass = report.passed() && revoked && same_block && online.outcome == Verdict::Reject &&
              online.reason == Reason::Revoked && offline.outcome == Verdict::Accept;
  return {pass, fmt("script %s; online %s(%s) at height %llu, offline %s", report.passed() ? "PASS" : "FAIL",
                    std::string(to_string(online.outcome)).c_str(),
                    std::string(to_string(online.reason)).c_str(), (unsigned long long)height,
                    std::string(to_string(offline.outcome)).c_str())};
}

// ---- 3: three-week rule ------------------------------------------------------

Outcome criterion3()
{
  fixture::World w(fixture::desk_group(), 6);
  w.onboard();
  auto        t    = w.c->now();
  auto        addr = w.issue(w.clinic, w.nikos, CertType::Vaccination);
  std::size_t early_ok = 0, checks = 0;
  for (Timestamp day = 0; day < 21; ++day)
  {
    w.c->advance_time(t + day * kDay - w.c->now());
    auto v = w.verify(w.cafe, w.nikos, addr);
    ++checks;
    early_ok += v.outcome == Verdict::Reject && v.reason == Reason::NotYetValid ? 1 : 0;
  }
  // last second before the boundary
  w.c->advance_time(t + 21 * kDay - 1 - w.c->now());
  auto last = w.verify(w.cafe, w.nikos, addr);
  ++checks;
  early_ok += last.reason == Reason::NotYetValid ? 1 : 0;
  w.c->advance_time(1);
  auto at = w.verify(w.cafe, w.nikos, addr);
  bool pass = early_ok == checks && at.outcome == Verdict::Accept;
  return {pass, fmt("%zu/%zu NotYetValid before t+21d; at t+21d %s", early_ok, checks,
                    std::string(to_string(at.outcome)).c_str())};
}

// ---- 4: chain integrity sweep ------------------------------------------------

Outcome criterion4()
{
  fixture::World w(fixture::desk_group(), 8);
  w.register_issuer(w.lab, {CertType::Test});
  w.register_verifier(w.border, LoggingClass::StateUpdating);
  auto addr = w.issue(w.lab, w.maria, CertType::Test);
  w.verify(w.border, w.maria, addr);
  auto const blocks = w.c->chain().blocks().size();
  auto const files  = ledger::export_files(w.c->chain());
  if (blocks != 5 || ledger::verify_chain_files(files))
  {
    return {false, fmt("setup: %zu blocks", blocks)};
  }

  auto         start = Clock::now();
  std::mt19937 gen(4);
  std::size_t  mutations = 0, missed = 0;
  std::string first_miss;
  auto        sweep = [&](std::string ledger::ChainFiles::*member, char const *name) {
    std::string const &original = files.*member;
    for (std::size_t pos = 0; pos < original.size(); ++pos)
    {
      // all 255 values per position is too slow; a low-bit flip, a hex
      // digit swap and one random byte per position instead
      for (char repl : {char(original[pos] ^ 1), original[pos] == '0' ? 'f' : '0', char(gen())})
      {
        if (repl == original[pos])
        {
          continue;
        }
        auto copy          = files;
        (copy.*member)[pos] = repl;
        ++mutations;
        if (!ledger::verify_chain_files(copy))
        {
          if (missed++ == 0)
          {
            first_miss = fmt("%s byte %zu", name, pos);
          }
        }
      }
    }
  };
  sweep(&ledger::ChainFiles::blocks, "chain.jsonl");
  sweep(&ledger::ChainFiles::store, "store.json");
  return {missed == 0, fmt("%zu single-byte mutations over %zu+%zu bytes, %zu undetected%s%s; %.1fs",
                           mutations, files.blocks.size(), files.store.size(), missed,
                           missed ? ", first " : "", first_miss.c_str(), seconds_since(start))};
}

// ---- 5: Schnorr completeness and extraction ----------------------------------

Outcome criterion5()
{
  auto        test = crypto::GroupParams::test();
  crypto::Rng rng(55);
  std::size_t sig_ok = 0, id_ok = 0, extracted = 0;
  for (int i = 0; i < 1000; ++i)
  {
    auto keys = crypto::keygen(test, rng);
    auto msg  = "message " + std::to_string(i);
    sig_ok += crypto::verify(test, keys.pk, msg, crypto::sign(test, keys.sk, msg, rng)) ? 1 : 0;
    auto c = crypto::schnorr_commit(test, rng);
    auto r = crypto::schnorr_challenge(test, rng);
    auto s = crypto::schnorr_respond(test, keys.sk, c.st, r);
    id_ok += crypto::schnorr_check(test, keys.pk, c.I, r, s) ? 1 : 0;
  }
  for (int i = 0; i < 100; ++i)
  {
    auto keys = crypto::keygen(test, rng);
    auto c    = crypto::schnorr_commit(test, rng);
    auto r1   = crypto::schnorr_challenge(test, rng);
    auto r2   = crypto::schnorr_challenge(test, rng);
    while (r2 == r1)
    {
      r2 = crypto::schnorr_challenge(test, rng);
    }
    auto s1 = crypto::schnorr_respond(test, keys.sk, c.st, r1);
    auto s2 = crypto::schnorr_respond(test, keys.sk, c.st, r2);
    bool both = crypto::schnorr_check(test, keys.pk, c.I, r1, s1) &&
                crypto::schnorr_check(test, keys.pk, c.I, r2, s2);
    extracted += both && crypto::extract_witness(test, r1, s1, r2, s2) == keys.sk ? 1 : 0;
  }
  return {sig_ok == 1000 && id_ok == 1000 && extracted == 100,
          fmt("signatures %zu/1000, identification %zu/1000, extraction %zu/100", sig_ok, id_ok,
              extracted)};
}

// ---- 6: SIR -----------------------------------------------------------------

Outcome criterion6()
{
  analytics::SirParams p{0.3, 0.1, 1000, {990, 10, 0}};
  auto                 x     = p.initial;
  double               worst = 0;
  for (int i = 0; i < 10000; ++i)
  {
    x     = analytics::sir_step(p, x, 0.1);
    worst = std::max(worst, std::abs(x.S + x.I + x.R - p.N));
  }
  analytics::SirParams gen{0.3, 0.1, 1000, {999, 1, 0}};
  auto                 fit = analytics::sir_fit(analytics::sir_forecast(gen, 60, 1), {});
  bool recovered = std::abs(fit.params.beta - 0.3) <= 0.01 && std::abs(fit.params.gamma - 0.1) <= 0.01;
  return {worst <= 1e-9 * p.N && recovered,
          fmt("max |S+I+R-N| = %.3g; fit beta=%.6f gamma=%.6f", worst, fit.params.beta, fit.params.gamma)};
}

// ---- 7: SPRT ----------------------------------------------------------------

Outcome criterion7()
{
  constexpr int trials = 10000;
  auto          rate   = [&](double p, std::uint32_t seed) {
    std::mt19937                     gen(seed);
    std::bernoulli_distribution      obs(p);
    int                              h1 = 0;
    for (int t = 0; t < trials; ++t)
    {
      auto s = analytics::sprt_init(0.1, 0.3, 0.05, 0.05);
      while (s.decision == analytics::SprtDecision::Continue)
      {
        s = analytics::sprt_update(s, obs(gen));
      }
      h1 += s.decision == analytics::SprtDecision::AcceptH1 ? 1 : 0;
    }
    return double(h1) / trials;
  };
  double se       = std::sqrt(0.05 * 0.95 / trials);
  double false_al = rate(0.1, 1);
  double detect   = rate(0.3, 2);
  return {false_al <= 0.05 + 2 * se && detect >= 0.95 - 2 * se,
          fmt("false alarm %.4f (limit %.4f), detection %.4f (limit %.4f)", false_al, 0.05 + 2 * se,
              detect, 0.95 - 2 * se)};
}

// ---- 8: LOF -----------------------------------------------------------------

std::vector<double> brute_lof(std::vector<std::vector<double>> const &pts, std::size_t k)
{
  auto n    = pts.size();
  auto dist = [&](std::size_t a, std::size_t b) {
    double s = 0;
    for (std::size_t d = 0; d < pts[a].size(); ++d)
    {
      s += (pts[a][d] - pts[b][d]) * (pts[a][d] - pts[b][d]);
    }
    return std::sqrt(s);
  };
  std::vector<double>                   kd(n), lrd(n), out(n);
  std::vector<std::vector<std::size_t>> nb(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    std::vector<double> ds;
    for (std::size_t j = 0; j < n; ++j)
    {
      if (j != i)
      {
        ds.push_back(dist(i, j));
      }
    }
    std::sort(ds.begin(), ds.end());
    kd[i] = ds[k - 1];
    for (std::size_t j = 0; j < n; ++j)
    {
      if (j != i && dist(i, j) <= kd[i])
      {
        nb[i].push_back(j);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
  {
    double s = 0;
    for (auto o : nb[i])
    {
      s += std::max(kd[o], dist(i, o));
    }
    lrd[i] = nb[i].size() / s;
  }
  for (std::size_t i = 0; i < n; ++i)
  {
    double s = 0;
    for (auto o : nb[i])
    {
      s += lrd[o];
    }
    out[i] = s / nb[i].size() / lrd[i];
  }
  return out;
}

Outcome criterion8()
{
  int    wins = 0;
  double worst = 0;
  for (std::uint32_t trial = 0; trial < 100; ++trial)
  {
    std::mt19937                           gen(1000 + trial);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::vector<double>>       pts;
    for (int i = 0; i < 99; ++i)
    {
      pts.push_back({u(gen), u(gen)});
    }
    // planted point a fixed distance outside the unit square, random direction
    double angle = u(gen) * 2 * M_PI;
    pts.push_back({0.5 + 1.5 * std::cos(angle), 0.5 + 1.5 * std::sin(angle)});
    auto scores = analytics::lof_scores(pts, 10);
    auto ref    = brute_lof(pts, 10);
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
      worst = std::max(worst, std::abs(scores[i] - ref[i]));
    }
    bool strict = std::all_of(scores.begin(), scores.end() - 1,
                              [&](double s) { return s < scores.back(); });
    wins += strict ? 1 : 0;
  }
  return {wins == 100 && worst <= 1e-9,
          fmt("outlier strictly highest in %d/100; max deviation from reference %.3g", wins, worst)};
}

// ---- 9: determinism -----------------------------------------------------------

Outcome criterion9()
{
  std::ifstream     in(std::string(SCENARIO_DIR) + "/reference.json");
  std::stringstream ss;
  ss << in.rdbuf();
  auto script = nlohmann::json::parse(ss.str());
  auto a      = scenario::run(script, 7);
  auto b      = scenario::run(script, 7);
  bool same   = a.chain.genesis == b.chain.genesis && a.chain.blocks == b.chain.blocks &&
              a.chain.store == b.chain.store && a.analytics == b.analytics && a.verdicts == b.verdicts &&
              a.text() == b.text();
  return {a.passed() && same && !a.analytics.empty(),
          fmt("reference scenario %s; chain %zu bytes, %zu analytics files, %s",
              a.passed() ? "passed" : "failed", a.chain.blocks.size(), a.analytics.size(),
              same ? "byte-identical" : "DIFFERENT")};
}

}  // namespace

int main()
{
  std::vector<std::pair<char const *, std::function<Outcome()>>> criteria{
      {"protocol soundness fuzzing", criterion1},
      {"revocation online/offline", criterion2},
      {"three-week rule", criterion3},
      {"chain integrity sweep", criterion4},
      {"schnorr completeness and extraction", criterion5},
      {"SIR conservation and recovery", criterion6},
      {"SPRT error rates", criterion7},
      {"LOF planted outlier", criterion8},
      {"determinism", criterion9},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i)
  {
    Outcome o;
    try
    {
      o = criteria[i].second();
    }
    catch (std::exception const &e)
    {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %zu: %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
