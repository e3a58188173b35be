#include "hygiea/analytics.hpp"
#include "hygiea/ledger.hpp"
#include "hygiea/protocols.hpp"
#include "hygiea/scenario.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hygiea;

namespace {

constexpr int kOk      = 0;
constexpr int kFailure = 1;
constexpr int kUsage   = 2;

// Usage/config problems that map to exit 2.
struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

std::string slurp(fs::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw UsageError("cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(fs::path const &path, std::string const &text)
{
  if (path.has_parent_path())
  {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out)
  {
    throw UsageError("cannot write " + path.string());
  }
  out << text;
}

json parse_json(std::string const &text, std::string const &what)
{
  try
  {
    return json::parse(text);
  }
  catch (json::exception const &e)
  {
    throw UsageError(what + ": " + e.what());
  }
}

// stdout when out is empty
void emit(std::string const &out, std::string const &text)
{
  if (out.empty())
  {
    std::cout << text;
  }
  else
  {
    spit(out, text);
  }
}

std::string violation_text(ledger::Violation const &v)
{
  return "violation at height " + std::to_string(v.height) + ": " +
         std::string(to_string(v.kind)) + ": " + v.detail;
}

struct InitArgs
{
  std::string genesis;
  std::string chain_dir;
  bool        force{false};
};

int cmd_init(InitArgs const &a)
{
  ledger::GenesisConfig config;
  try
  {
    config = ledger::genesis_config_from_json(parse_json(slurp(a.genesis), a.genesis));
  }
  catch (ledger::ConfigError const &e)
  {
    throw UsageError(std::string("invalid genesis: ") + e.what());
  }
  fs::path dir(a.chain_dir);
  if (fs::exists(dir) && !fs::is_empty(dir) && !a.force)
  {
    throw UsageError(a.chain_dir + " already exists (use --force to overwrite)");
  }
  auto chain = ledger::ChainState::genesis(config);
  ledger::write_chain_files(dir, ledger::export_files(chain));
  std::cout << "governance " << chain.governance_address().hex() << "\n";
  std::cout << "factory " << chain.factory_address().hex() << "\n";
  return kOk;
}

struct ScenarioArgs
{
  std::string                  script;
  std::optional<std::uint64_t> seed;
  std::string                  chain_dir;
  std::string                  out;
};

int cmd_run_scenario(ScenarioArgs const &a)
{
  auto script = parse_json(slurp(a.script), a.script);
  std::uint64_t seed;
  if (a.seed)
  {
    seed = *a.seed;
  }
  else
  {
    std::random_device rd;
    seed = (std::uint64_t{rd()} << 32) | rd();
    std::cerr << "seed " << seed << "\n";
  }

  scenario::Report report;
  try
  {
    report = scenario::run(script, seed);
  }
  catch (scenario::ScriptError const &e)
  {
    throw UsageError(std::string("bad script: ") + e.what());
  }
  catch (ledger::ConfigError const &e)
  {
    throw UsageError(std::string("bad genesis in script: ") + e.what());
  }

  auto text = report.text();
  std::cout << text;
  if (!a.chain_dir.empty())
  {
    ledger::write_chain_files(a.chain_dir, report.chain);
  }
  if (!a.out.empty())
  {
    fs::path out(a.out);
    spit(out / "report.txt", text);
    spit(out / "verdicts.jsonl", report.verdicts);
    for (auto const &[name, body] : report.analytics)
    {
      spit(out / name, body);
    }
  }
  return report.passed() ? kOk : kFailure;
}

ledger::ChainFiles read_dir(std::string const &dir)
{
  if (!fs::is_directory(dir))
  {
    throw UsageError("no chain directory at " + dir);
  }
  try
  {
    return ledger::read_chain_files(dir);
  }
  catch (std::exception const &e)
  {
    throw UsageError(e.what());
  }
}

int cmd_verify_chain(std::string const &dir)
{
  auto files = read_dir(dir);
  if (auto v = ledger::verify_chain_files(files))
  {
    std::cout << violation_text(*v) << "\n";
    return kFailure;
  }
  auto lines = std::count(files.blocks.begin(), files.blocks.end(), '\n');
  std::cout << "ok: " << lines << " blocks\n";
  return kOk;
}

// A verified chain directory, decoded.
struct LoadedChain
{
  ledger::GenesisConfig    config;
  contracts::ContractStore store;
  ledger::Block            head;
};

std::optional<LoadedChain> load_verified(std::string const &dir)
{
  auto files = read_dir(dir);
  if (auto v = ledger::verify_chain_files(files))
  {
    std::cout << violation_text(*v) << "\n";
    return std::nullopt;
  }
  LoadedChain out;
  out.config = ledger::genesis_config_from_json(json::parse(files.genesis));
  out.store  = contracts::store_from_json(out.config.group, json::parse(files.store));
  auto last  = files.blocks.rfind('\n', files.blocks.size() - 2);
  auto line  = last == std::string::npos ? files.blocks : files.blocks.substr(last + 1);
  out.head   = ledger::block_from_json(out.config.group, json::parse(line));
  return out;
}

contracts::GovernanceState const &governance(LoadedChain const &c)
{
  auto addr = ledger::governance_address(c.config.group, c.config.validators.front());
  return std::get<contracts::GovernanceState>(c.store.at(addr));
}

int cmd_snapshot(std::string const &dir, std::string const &out)
{
  auto chain = load_verified(dir);
  if (!chain)
  {
    return kFailure;
  }
  protocols::RevocationSnapshot snap;
  auto const &gov = governance(*chain);
  snap.revoked.insert(gov.revoked.begin(), gov.revoked.end());
  snap.as_of = chain->head.timestamp;
  emit(out, protocols::to_json(snap).dump() + "\n");
  return kOk;
}

struct StatusArgs
{
  std::string                  chain_dir;
  std::string                  certificate;
  std::string                  mode{"online"};
  std::string                  snapshot;
  std::optional<std::uint64_t> at;
};

int cmd_status(StatusArgs const &a)
{
  Address addr;
  try
  {
    addr = Address::from_hex(a.certificate);
  }
  catch (DecodeError const &e)
  {
    throw UsageError(std::string("certificate: ") + e.what());
  }
  bool offline = a.mode == "offline";
  std::optional<protocols::RevocationSnapshot> snap;
  if (offline)
  {
    if (a.snapshot.empty())
    {
      throw UsageError("offline status needs --snapshot");
    }
    try
    {
      snap = protocols::snapshot_from_json(parse_json(slurp(a.snapshot), a.snapshot));
    }
    catch (DecodeError const &e)
    {
      throw UsageError(std::string("snapshot: ") + e.what());
    }
  }
  auto chain = load_verified(a.chain_dir);
  if (!chain)
  {
    return kFailure;
  }
  auto it = chain->store.find(addr);
  if (it == chain->store.end() || !std::holds_alternative<contracts::CertificateState>(it->second))
  {
    std::cout << "unknown certificate\n";
    return kFailure;
  }
  auto cert = std::get<contracts::CertificateState>(it->second).cert;
  if (snap)
  {
    cert.status_flag = snap->revoked.count(addr) ? contracts::StatusFlag::Revoked
                                                 : contracts::StatusFlag::Issued;
  }
  auto at     = a.at.value_or(chain->head.timestamp);
  auto status = contracts::effective_status(chain->config.group, cert, at, governance(*chain).registry);
  std::cout << contracts::to_string(status) << "\n";
  return kOk;
}

struct AnalyticsArgs
{
  std::string store;
  std::string out;
  std::string region;
  double      population{1000};
  double      i0{1};
  double      beta{0};
  double      gamma{0};
  std::size_t horizon{30};
  std::string start;
  double      p0{0.1};
  double      p1{0.3};
  double      alpha{0.05};
  double      beta_err{0.05};
  std::string stream;
  std::size_t k{10};
  std::string by{"demographic_group"};
  std::string metric{"InfectionRate"};
  double      threshold{1.96};
  std::string populations;
};

analytics::RecordStore load_store(std::string const &path)
{
  auto text = slurp(path);
  try
  {
    return analytics::load_jsonl(text);
  }
  catch (analytics::ValidationError const &e)
  {
    throw UsageError(path + ": " + e.what());
  }
}

std::vector<bool> read_stream(std::string const &path)
{
  std::istringstream in(slurp(path));
  std::vector<bool>  out;
  std::string        token;
  while (in >> token)
  {
    if (token == "1" || token == "positive" || token == "Positive")
    {
      out.push_back(true);
    }
    else if (token == "0" || token == "negative" || token == "Negative")
    {
      out.push_back(false);
    }
    else
    {
      throw UsageError("stream: unrecognised observation '" + token + "'");
    }
  }
  return out;
}

int cmd_analytics(std::string const &sub, AnalyticsArgs const &a)
{
  auto        store   = load_store(a.store);
  auto const &records = store.records();
  analytics::FitConfig fc;
  fc.N  = a.population;
  fc.I0 = a.i0;

  if (sub == "distribution")
  {
    analytics::RecordFilter filter;
    if (!a.region.empty())
    {
      filter = [&](analytics::HealthRecord const &r) { return r.geolocation == a.region; };
    }
    emit(a.out, analytics::distribution_csv(analytics::symptom_distribution(records, filter)));
  }
  else if (sub == "fit")
  {
    auto fit = analytics::sir_fit(analytics::case_series(records, a.region), fc);
    emit(a.out, analytics::to_json(fit).dump() + "\n");
  }
  else if (sub == "forecast")
  {
    analytics::SirParams p;
    p.beta    = a.beta;
    p.gamma   = a.gamma;
    p.N       = a.population;
    p.initial = {a.population - a.i0, a.i0, 0};
    analytics::validate(p);
    analytics::Day start;
    if (!a.start.empty())
    {
      start = analytics::parse_date(a.start);
    }
    else
    {
      auto series = analytics::case_series(records, a.region);
      start       = series.counts.empty() ? 0 : series.counts.back().first + 1;
    }
    emit(a.out, analytics::series_csv(analytics::sir_forecast(p, a.horizon, start)));
  }
  else if (sub == "sprt")
  {
    auto state = analytics::sprt_init(a.p0, a.p1, a.alpha, a.beta_err);
    std::vector<bool> obs;
    if (!a.stream.empty())
    {
      obs = read_stream(a.stream);
    }
    else
    {
      for (auto const &r : records)
      {
        if (r.test_result != analytics::TestResult::NA)
        {
          obs.push_back(r.test_result == analytics::TestResult::Positive);
        }
      }
    }
    for (bool x : obs)
    {
      if (state.decision != analytics::SprtDecision::Continue)
      {
        break;
      }
      state = analytics::sprt_update(state, x);
    }
    emit(a.out, analytics::to_json(state).dump() + "\n");
    if (a.out.empty())
    {
      std::cerr << "decision " << analytics::to_string(state.decision) << "\n";
    }
  }
  else if (sub == "lof")
  {
    std::vector<std::vector<double>> points;
    for (auto const &r : records)
    {
      points.push_back(analytics::features(r));
    }
    emit(a.out, analytics::scores_csv(analytics::lof_scores(points, a.k)));
  }
  else if (sub == "disparity")
  {
    auto report = analytics::disparity_check(records, a.by, analytics::metric_from_string(a.metric),
                                             a.threshold);
    emit(a.out, analytics::to_json(report).dump() + "\n");
  }
  else if (sub == "regions")
  {
    std::map<std::string, double> pop;
    if (!a.populations.empty())
    {
      auto j = parse_json(slurp(a.populations), a.populations);
      if (!j.is_object())
      {
        throw UsageError("populations must map region to population");
      }
      for (auto const &[region, n] : j.items())
      {
        if (!n.is_number() || n.get<double>() <= 0)
        {
          throw UsageError("population of " + region + " must be positive");
        }
        pop[region] = n.get<double>();
      }
    }
    emit(a.out, analytics::regions_csv(analytics::regional_comparison(records, pop)));
  }
  return kOk;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"hygiea: health certificate consortium simulator"};
  app.require_subcommand(1);

  InitArgs init;
  auto    *init_cmd = app.add_subcommand("init", "create a chain directory from a genesis file");
  init_cmd->add_option("--genesis", init.genesis)->required();
  init_cmd->add_option("--chain-dir", init.chain_dir)->required();
  init_cmd->add_flag("--force", init.force);

  ScenarioArgs sc;
  auto        *sc_cmd = app.add_subcommand("run-scenario", "execute a scenario script");
  sc_cmd->add_option("script", sc.script)->required();
  sc_cmd->add_option("--seed", sc.seed);
  sc_cmd->add_option("--chain-dir", sc.chain_dir, "write the final chain here");
  sc_cmd->add_option("--out", sc.out, "directory for report, verdicts and analytics");

  std::string verify_dir;
  auto       *vc_cmd = app.add_subcommand("verify-chain", "check a chain directory");
  vc_cmd->add_option("--chain-dir", verify_dir)->required();

  std::string snap_dir, snap_out;
  auto       *snap_cmd = app.add_subcommand("snapshot", "export the revocation snapshot");
  snap_cmd->add_option("--chain-dir", snap_dir)->required();
  snap_cmd->add_option("--out", snap_out);

  StatusArgs st;
  auto      *st_cmd = app.add_subcommand("status", "effective status of one certificate");
  st_cmd->add_option("--chain-dir", st.chain_dir)->required();
  st_cmd->add_option("--certificate", st.certificate)->required();
  st_cmd->add_option("--mode", st.mode)->check(CLI::IsMember({"online", "offline"}));
  st_cmd->add_option("--snapshot", st.snapshot);
  st_cmd->add_option("--at", st.at, "unix time (default: head block time)");

  AnalyticsArgs an;
  auto         *an_cmd = app.add_subcommand("analytics", "population analytics over a record store");
  an_cmd->require_subcommand(1);
  an_cmd->add_option("--store", an.store, "JSON lines health records")->required();
  an_cmd->add_option("--out", an.out);
  std::string sub;
  auto        add = [&](char const *name, char const *desc) {
    auto *c = an_cmd->add_subcommand(name, desc);
    c->callback([&sub, name] { sub = name; });
    return c;
  };
  add("distribution", "symptom frequencies")->add_option("--region", an.region);
  auto *fit = add("fit", "least-squares SIR fit");
  fit->add_option("--region", an.region);
  fit->add_option("--population", an.population);
  fit->add_option("--i0", an.i0);
  auto *fc = add("forecast", "SIR new cases");
  fc->add_option("--beta", an.beta)->required();
  fc->add_option("--gamma", an.gamma)->required();
  fc->add_option("--population", an.population);
  fc->add_option("--i0", an.i0);
  fc->add_option("--horizon", an.horizon);
  fc->add_option("--start", an.start, "first forecast date YYYY-MM-DD");
  fc->add_option("--region", an.region);
  auto *sp = add("sprt", "sequential test on positivity");
  sp->add_option("--p0", an.p0);
  sp->add_option("--p1", an.p1);
  sp->add_option("--alpha", an.alpha);
  sp->add_option("--beta", an.beta_err);
  sp->add_option("--stream", an.stream, "file of 1/0 observations");
  add("lof", "outlier scores")->add_option("--k", an.k);
  auto *dp = add("disparity", "group rate comparison");
  dp->add_option("--by", an.by)->check(CLI::IsMember({"demographic_group", "geolocation"}));
  dp->add_option("--metric", an.metric);
  dp->add_option("--threshold", an.threshold);
  add("regions", "cases per region")->add_option("--populations", an.populations);

  try
  {
    app.parse(argc, argv);
  }
  catch (CLI::CallForHelp const &e)
  {
    return app.exit(e);
  }
  catch (CLI::CallForAllHelp const &e)
  {
    return app.exit(e);
  }
  catch (CLI::ParseError const &e)
  {
    app.exit(e);
    return kUsage;
  }

  try
  {
    if (*init_cmd)
    {
      return cmd_init(init);
    }
    if (*sc_cmd)
    {
      return cmd_run_scenario(sc);
    }
    if (*vc_cmd)
    {
      return cmd_verify_chain(verify_dir);
    }
    if (*snap_cmd)
    {
      return cmd_snapshot(snap_dir, snap_out);
    }
    if (*st_cmd)
    {
      return cmd_status(st);
    }
    return cmd_analytics(sub, an);
  }
  catch (UsageError const &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  catch (analytics::ValidationError const &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  catch (std::exception const &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
