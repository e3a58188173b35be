#include "hygiea/analytics.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <set>

namespace hygiea::analytics {
namespace {

using nlohmann::json;

json const &field(json const &j, char const *key)
{
  if (!j.contains(key))
  {
    throw ValidationError(std::string("missing field: ") + key);
  }
  return j.at(key);
}

unsigned small_count(json const &v, char const *key)
{
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() > 1000)
  {
    throw ValidationError(std::string("expected a small non-negative integer: ") + key);
  }
  return v.get<unsigned>();
}

std::string text(json const &v, char const *key)
{
  if (!v.is_string())
  {
    throw ValidationError(std::string("expected string: ") + key);
  }
  return v.get<std::string>();
}

bool flag(json const &v, char const *key)
{
  if (!v.is_boolean())
  {
    throw ValidationError(std::string("expected boolean: ") + key);
  }
  return v.get<bool>();
}

}  // namespace

HealthRecord record_from_json(json const &j)
{
  if (!j.is_object())
  {
    throw ValidationError("health record must be a JSON object");
  }
  static std::set<std::string> const known{
      "symptoms",          "age",     "geolocation", "travel_history",  "past_infections",
      "test_result",       "demographic_group", "consent", "observed_at", "certificate_type"};
  for (auto const &[key, value] : j.items())
  {
    if (known.count(key) == 0)
    {
      throw ValidationError("unknown field: " + key);
    }
  }

  HealthRecord r;
  auto const  &symptoms = field(j, "symptoms");
  if (!symptoms.is_object())
  {
    throw ValidationError("symptoms must be an object of flags");
  }
  for (auto const &[key, value] : symptoms.items())
  {
    auto it = std::find(kSymptoms.begin(), kSymptoms.end(), key);
    if (it == kSymptoms.end())
    {
      throw ValidationError("unknown symptom: " + key);
    }
    r.symptoms[static_cast<std::size_t>(it - kSymptoms.begin())] = flag(value, "symptoms");
  }
  r.age         = small_count(field(j, "age"), "age");
  r.geolocation = text(field(j, "geolocation"), "geolocation");
  auto const &travel = field(j, "travel_history");
  if (!travel.is_array())
  {
    throw ValidationError("travel_history must be an array");
  }
  for (auto const &t : travel)
  {
    r.travel_history.push_back(text(t, "travel_history"));
  }
  r.past_infections   = small_count(field(j, "past_infections"), "past_infections");
  r.test_result       = test_result_from_string(text(field(j, "test_result"), "test_result"));
  r.demographic_group = text(field(j, "demographic_group"), "demographic_group");
  r.consent           = flag(field(j, "consent"), "consent");
  r.observed_at       = parse_date(text(field(j, "observed_at"), "observed_at"));
  if (j.contains("certificate_type") && !j.at("certificate_type").is_null())
  {
    try
    {
      r.certificate_type =
          contracts::cert_type_from_string(text(j.at("certificate_type"), "certificate_type"));
    }
    catch (DecodeError const &e)
    {
      throw ValidationError(e.what());
    }
  }
  validate(r);
  return r;
}

json to_json(HealthRecord const &r)
{
  json symptoms = json::object();
  for (std::size_t i = 0; i < kSymptomCount; ++i)
  {
    symptoms[std::string(kSymptoms[i])] = r.symptoms[i];
  }
  json out{{"symptoms", symptoms},
           {"age", r.age},
           {"geolocation", r.geolocation},
           {"travel_history", r.travel_history},
           {"past_infections", r.past_infections},
           {"test_result", std::string(to_string(r.test_result))},
           {"demographic_group", r.demographic_group},
           {"consent", r.consent},
           {"observed_at", format_date(r.observed_at)}};
  if (r.certificate_type)
  {
    out["certificate_type"] = std::string(contracts::to_string(*r.certificate_type));
  }
  return out;
}

RecordStore load_jsonl(std::string_view input)
{
  RecordStore store;
  std::size_t line_no = 0;
  while (!input.empty())
  {
    auto nl   = input.find('\n');
    auto line = input.substr(0, nl);
    input     = nl == std::string_view::npos ? std::string_view{} : input.substr(nl + 1);
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos)
    {
      continue;
    }
    try
    {
      auto j = json::parse(line);
      store.ingest(record_from_json(j));
    }
    catch (json::exception const &e)
    {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    catch (ValidationError const &e)
    {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return store;
}

std::string to_jsonl(RecordStore const &store)
{
  std::string out;
  for (auto const &r : store.records())
  {
    out += to_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

std::string format_number(double value)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

double round_sig6(double value)
{
  return std::strtod(format_number(value).c_str(), nullptr);
}

std::string distribution_csv(std::vector<SymptomRow> const &rows)
{
  std::string out = "symptom,count,proportion\n";
  for (auto const &r : rows)
  {
    out += r.symptom + "," + std::to_string(r.count) + "," + format_number(r.proportion) + "\n";
  }
  return out;
}

std::string regions_csv(std::vector<RegionRow> const &rows)
{
  std::string out = "region,cases,per_capita\n";
  for (auto const &r : rows)
  {
    out += r.region + "," + std::to_string(r.cases) + "," +
           (r.per_capita ? format_number(*r.per_capita) : std::string()) + "\n";
  }
  return out;
}

std::string series_csv(CaseSeries const &series)
{
  std::string out = "date,new_cases\n";
  for (auto const &[day, count] : series.counts)
  {
    out += format_date(day) + "," + format_number(count) + "\n";
  }
  return out;
}

std::string scores_csv(std::vector<double> const &scores)
{
  std::string out = "index,lof\n";
  for (std::size_t i = 0; i < scores.size(); ++i)
  {
    out += std::to_string(i) + "," + format_number(scores[i]) + "\n";
  }
  return out;
}

json to_json(SirFit const &fit)
{
  return json{{"beta", round_sig6(fit.params.beta)},
              {"gamma", round_sig6(fit.params.gamma)},
              {"N", round_sig6(fit.params.N)},
              {"S0", round_sig6(fit.params.initial.S)},
              {"I0", round_sig6(fit.params.initial.I)},
              {"R0", round_sig6(fit.params.initial.R)},
              {"sse", round_sig6(fit.sse)},
              {"degenerate", fit.degenerate}};
}

json to_json(SprtState const &s)
{
  return json{{"p0", round_sig6(s.p0)},
              {"p1", round_sig6(s.p1)},
              {"alpha", round_sig6(s.alpha)},
              {"beta_err", round_sig6(s.beta_err)},
              {"log_lr", round_sig6(s.log_lr)},
              {"positives", s.positives},
              {"negatives", s.negatives},
              {"steps", s.positives + s.negatives},
              {"decision", std::string(to_string(s.decision))}};
}

json to_json(DisparityReport const &report)
{
  auto group = [](GroupRate const &g) {
    return json{{"group", g.group},
                {"successes", g.successes},
                {"total", g.total},
                {"rate", round_sig6(g.rate)}};
  };
  json groups   = json::array();
  json warnings = json::array();
  for (auto const &g : report.groups)
  {
    groups.push_back(group(g));
  }
  for (auto const &w : report.warnings)
  {
    warnings.push_back(json{{"a", group(w.a)}, {"b", group(w.b)}, {"z", round_sig6(w.z)}});
  }
  return json{{"groups", groups}, {"warnings", warnings}, {"notes", report.notes}};
}

json to_json(QualityReport const &q)
{
  auto dist = [](std::vector<SymptomRow> const &rows) {
    json out = json::array();
    for (auto const &r : rows)
    {
      out.push_back(
          json{{"symptom", r.symptom}, {"count", r.count}, {"proportion", round_sig6(r.proportion)}});
    }
    return out;
  };
  json scores = json::array();
  for (auto s : q.scores)
  {
    scores.push_back(round_sig6(s));
  }
  return json{{"scores", scores},
              {"excluded", q.excluded},
              {"distribution_all", dist(q.distribution_all)},
              {"distribution_clean", dist(q.distribution_clean)},
              {"fit_all", q.fit_all ? to_json(*q.fit_all) : json()},
              {"fit_clean", q.fit_clean ? to_json(*q.fit_clean) : json()}};
}

}  // namespace hygiea::analytics
