#include "hygiea/analytics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <regex>
#include <set>

namespace hygiea::analytics {

std::string_view to_string(TestResult r)
{
  switch (r)
  {
  case TestResult::Positive: return "Positive";
  case TestResult::Negative: return "Negative";
  case TestResult::NA: return "NA";
  }
  return "?";
}

TestResult test_result_from_string(std::string_view text)
{
  if (text == "Positive")
  {
    return TestResult::Positive;
  }
  if (text == "Negative")
  {
    return TestResult::Negative;
  }
  if (text == "NA")
  {
    return TestResult::NA;
  }
  throw ValidationError("unknown test result: " + std::string(text));
}

Day parse_date(std::string_view text)
{
  using namespace std::chrono;
  static std::regex const shape("^[0-9]{4}-[0-9]{2}-[0-9]{2}$");
  std::string s(text);
  if (!std::regex_match(s, shape))
  {
    throw ValidationError("date must be YYYY-MM-DD: " + s);
  }
  year_month_day ymd{year{std::stoi(s.substr(0, 4))},
                     month{static_cast<unsigned>(std::stoi(s.substr(5, 2)))},
                     day{static_cast<unsigned>(std::stoi(s.substr(8, 2)))}};
  if (!ymd.ok())
  {
    throw ValidationError("no such date: " + s);
  }
  return sys_days{ymd}.time_since_epoch().count();
}

std::string format_date(Day d)
{
  using namespace std::chrono;
  year_month_day ymd{sys_days{days{d}}};
  char           buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

bool valid_region_code(std::string_view code)
{
  static std::regex const pattern("^[A-Z]{2}(-[A-Z0-9]{1,3})?$");
  return std::regex_match(std::string(code), pattern);
}

void validate(HealthRecord const &r)
{
  if (!valid_region_code(r.geolocation))
  {
    throw ValidationError("malformed region code: '" + r.geolocation + "'");
  }
  for (auto const &t : r.travel_history)
  {
    if (!valid_region_code(t))
    {
      throw ValidationError("malformed region code in travel history: '" + t + "'");
    }
  }
}

bool RecordStore::ingest(HealthRecord const &record)
{
  validate(record);
  if (!record.consent)
  {
    return false;
  }
  records_.push_back(record);
  return true;
}

std::vector<SymptomRow> symptom_distribution(std::vector<HealthRecord> const &records,
                                             RecordFilter const &filter)
{
  std::array<std::size_t, kSymptomCount> counts{};
  std::size_t                            n = 0;
  for (auto const &r : records)
  {
    if (filter && !filter(r))
    {
      continue;
    }
    ++n;
    for (std::size_t i = 0; i < kSymptomCount; ++i)
    {
      counts[i] += r.symptoms[i] ? 1 : 0;
    }
  }
  std::vector<SymptomRow> out;
  if (n == 0)
  {
    return out;
  }
  for (std::size_t i = 0; i < kSymptomCount; ++i)
  {
    out.push_back({std::string(kSymptoms[i]), counts[i],
                   static_cast<double>(counts[i]) / static_cast<double>(n)});
  }
  return out;
}

void validate(SirParams const &p)
{
  auto const &s = p.initial;
  if (!(p.beta >= 0) || !(p.gamma >= 0) || !(p.N > 0) || !(s.S >= 0) || !(s.I >= 0) ||
      !(s.R >= 0))
  {
    throw ValidationError("SIR parameters must be non-negative with N > 0");
  }
  if (std::abs(s.S + s.I + s.R - p.N) > 1e-9 * p.N)
  {
    throw ValidationError("S0 + I0 + R0 must equal N");
  }
}

SirState sir_step(SirParams const &p, SirState const &x, double dt)
{
  if (!(dt >= 0))
  {
    throw ValidationError("dt must be non-negative");
  }
  if (x.S < 0 || x.I < 0 || x.R < 0)
  {
    throw ValidationError("SIR compartments must be non-negative");
  }
  double infections = p.beta * x.S * x.I / p.N * dt;
  double removals   = p.gamma * x.I * dt;
  return SirState{x.S - infections, x.I + infections - removals, x.R + removals};
}

void validate(CaseSeries const &series)
{
  for (std::size_t i = 0; i < series.counts.size(); ++i)
  {
    if (!(series.counts[i].second >= 0))
    {
      throw ValidationError("case counts must be non-negative");
    }
    if (i > 0 && series.counts[i].first <= series.counts[i - 1].first)
    {
      throw ValidationError("case series days must strictly increase");
    }
  }
}

CaseSeries case_series(std::vector<HealthRecord> const &records, std::string const &region)
{
  std::map<Day, double> by_day;
  for (auto const &r : records)
  {
    if (r.test_result == TestResult::Positive && (region.empty() || r.geolocation == region))
    {
      by_day[r.observed_at] += 1;
    }
  }
  CaseSeries out;
  out.region = region;
  if (by_day.empty())
  {
    return out;
  }
  for (Day d = by_day.begin()->first; d <= by_day.rbegin()->first; ++d)
  {
    auto it = by_day.find(d);
    out.counts.emplace_back(d, it == by_day.end() ? 0.0 : it->second);
  }
  return out;
}

namespace {

// Advances one day and returns the new infections in it.
double advance_day(SirParams const &p, SirState &x, double dt)
{
  double new_cases = 0;
  // Whole steps per day; a final partial step covers any remainder.
  double remaining = 1.0;
  while (remaining > 1e-12)
  {
    double h = std::min(dt, remaining);
    new_cases += p.beta * x.S * x.I / p.N * h;
    x = sir_step(p, x, h);
    remaining -= h;
  }
  return new_cases;
}

}  // namespace

CaseSeries sir_forecast(SirParams const &params, std::size_t horizon, Day start_day, double dt)
{
  validate(params);
  if (!(dt > 0))
  {
    throw ValidationError("dt must be positive");
  }
  CaseSeries out;
  SirState   x = params.initial;
  for (std::size_t i = 0; i < horizon; ++i)
  {
    out.counts.emplace_back(start_day + static_cast<Day>(i), advance_day(params, x, dt));
  }
  return out;
}

double sir_sse(CaseSeries const &series, double beta, double gamma, FitConfig const &config)
{
  if (series.counts.empty())
  {
    return 0;
  }
  SirParams p{beta, gamma, config.N, {config.N - config.I0 - config.R0, config.I0, config.R0}};
  SirState  x   = p.initial;
  Day       day = series.counts.front().first;
  double    sse = 0;
  for (auto const &[d, observed] : series.counts)
  {
    double model = 0;
    while (day <= d)
    {
      model = advance_day(p, x, config.dt);
      ++day;
    }
    sse += (model - observed) * (model - observed);
  }
  return sse;
}

namespace {

template <typename F>
double golden_section(F const &f, double lo, double hi, double tol)
{
  double const inv_phi = (std::sqrt(5.0) - 1) / 2;
  double       a = lo, b = hi;
  double       c = b - inv_phi * (b - a);
  double       d = a + inv_phi * (b - a);
  double       fc = f(c), fd = f(d);
  while (b - a > tol)
  {
    if (fc <= fd)
    {
      b  = d;
      d  = c;
      fd = fc;
      c  = b - inv_phi * (b - a);
      fc = f(c);
    }
    else
    {
      a  = c;
      c  = d;
      fc = fd;
      d  = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

}  // namespace

SirFit sir_fit(CaseSeries const &series, FitConfig const &config)
{
  validate(series);
  if (series.counts.size() < 5)
  {
    throw ValidationError("SIR fit needs at least 5 observations");
  }
  if (!(config.N > 0) || config.I0 < 0 || config.R0 < 0 || config.I0 + config.R0 > config.N ||
      config.grid_steps < 1 || !(config.dt > 0))
  {
    throw ValidationError("invalid fit configuration");
  }
  SirFit fit;
  fit.params.N       = config.N;
  fit.params.initial = {config.N - config.I0 - config.R0, config.I0, config.R0};

  bool all_zero = std::all_of(series.counts.begin(), series.counts.end(),
                              [](auto const &c) { return c.second == 0; });
  if (all_zero)
  {
    fit.degenerate = true;
    fit.sse        = sir_sse(series, 0, 0, config);
    return fit;
  }

  double const step       = 1.0 / config.grid_steps;
  double       best_beta  = 0;
  double       best_gamma = 0;
  double       best       = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= config.grid_steps; ++i)
  {
    double beta = static_cast<double>(i) / config.grid_steps;
    for (int j = 0; j <= config.grid_steps; ++j)
    {
      double gamma = static_cast<double>(j) / config.grid_steps;
      double e     = sir_sse(series, beta, gamma, config);
      if (e < best)
      {
        best       = e;
        best_beta  = beta;
        best_gamma = gamma;
      }
    }
  }

  auto refine = [&](double centre) {
    return std::pair{std::max(0.0, centre - step), std::min(1.0, centre + step)};
  };
  auto [blo, bhi] = refine(best_beta);
  double beta     = golden_section(
      [&](double b) { return sir_sse(series, b, best_gamma, config); }, blo, bhi,
      config.tolerance);
  if (double e = sir_sse(series, beta, best_gamma, config); e < best)
  {
    best      = e;
    best_beta = beta;
  }
  auto [glo, ghi] = refine(best_gamma);
  double gamma    = golden_section(
      [&](double g) { return sir_sse(series, best_beta, g, config); }, glo, ghi,
      config.tolerance);
  if (double e = sir_sse(series, best_beta, gamma, config); e < best)
  {
    best       = e;
    best_gamma = gamma;
  }

  fit.params.beta  = best_beta;
  fit.params.gamma = best_gamma;
  fit.sse          = best;
  return fit;
}

std::string_view to_string(SprtDecision d)
{
  switch (d)
  {
  case SprtDecision::Continue: return "Continue";
  case SprtDecision::AcceptH0: return "AcceptH0";
  case SprtDecision::AcceptH1: return "AcceptH1";
  }
  return "?";
}

SprtState sprt_init(double p0, double p1, double alpha, double beta_err)
{
  if (!(0 < p0 && p0 < p1 && p1 < 1))
  {
    throw ValidationError("SPRT needs 0 < p0 < p1 < 1");
  }
  if (!(0 < alpha && alpha < 0.5 && 0 < beta_err && beta_err < 0.5))
  {
    throw ValidationError("SPRT error bounds must lie in (0, 0.5)");
  }
  SprtState s;
  s.p0       = p0;
  s.p1       = p1;
  s.alpha    = alpha;
  s.beta_err = beta_err;
  return s;
}

SprtState sprt_update(SprtState const &state, bool positive)
{
  if (state.decision != SprtDecision::Continue)
  {
    throw StateError("SPRT already reached a decision");
  }
  SprtState s = state;
  if (positive)
  {
    ++s.positives;
  }
  else
  {
    ++s.negatives;
  }
  // Recomputed from the counts so the value does not depend on update order.
  s.log_lr = static_cast<double>(s.positives) * std::log(s.p1 / s.p0) +
             static_cast<double>(s.negatives) * std::log((1 - s.p1) / (1 - s.p0));
  if (s.log_lr >= std::log((1 - s.beta_err) / s.alpha))
  {
    s.decision = SprtDecision::AcceptH1;
  }
  else if (s.log_lr <= std::log(s.beta_err / (1 - s.alpha)))
  {
    s.decision = SprtDecision::AcceptH0;
  }
  return s;
}

std::vector<double> lof_scores(std::vector<std::vector<double>> const &points, std::size_t k)
{
  auto const n = points.size();
  if (n < 2 || k < 1 || k >= n)
  {
    throw ValidationError("LOF needs at least 2 points and 1 <= k < number of points");
  }
  for (auto const &p : points)
  {
    if (p.size() != points.front().size())
    {
      throw ValidationError("LOF points must share a dimension");
    }
  }

  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
  {
    for (std::size_t j = i + 1; j < n; ++j)
    {
      double s = 0;
      for (std::size_t d = 0; d < points[i].size(); ++d)
      {
        double diff = points[i][d] - points[j][d];
        s += diff * diff;
      }
      dist[i][j] = dist[j][i] = std::sqrt(s);
    }
  }

  std::vector<double>                   kdist(n);
  std::vector<std::vector<std::size_t>> hood(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    std::vector<double> others;
    for (std::size_t j = 0; j < n; ++j)
    {
      if (j != i)
      {
        others.push_back(dist[i][j]);
      }
    }
    std::nth_element(others.begin(), others.begin() + static_cast<long>(k - 1), others.end());
    kdist[i] = others[k - 1];
    for (std::size_t j = 0; j < n; ++j)
    {
      if (j != i && dist[i][j] <= kdist[i])
      {
        hood[i].push_back(j);
      }
    }
  }

  double const scale = *std::max_element(kdist.begin(), kdist.end());
  double const floor = std::numeric_limits<double>::epsilon() * std::max(scale, 1.0);

  // Neighbour terms are summed in sorted order so scores do not depend on
  // input order.
  auto sorted_mean = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };

  std::vector<double> lrd(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    std::vector<double> reach;
    for (auto o : hood[i])
    {
      reach.push_back(std::max(kdist[o], dist[i][o]));
    }
    lrd[i] = 1.0 / std::max(sorted_mean(std::move(reach)), floor);
  }

  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    std::vector<double> neighbour_lrd;
    for (auto o : hood[i])
    {
      neighbour_lrd.push_back(lrd[o]);
    }
    scores[i] = sorted_mean(std::move(neighbour_lrd)) / lrd[i];
  }
  return scores;
}

std::vector<double> features(HealthRecord const &r)
{
  auto symptoms = std::count(r.symptoms.begin(), r.symptoms.end(), true);
  return {static_cast<double>(r.age), static_cast<double>(r.past_infections),
          static_cast<double>(symptoms), static_cast<double>(r.travel_history.size())};
}

std::string_view to_string(Metric m)
{
  switch (m)
  {
  case Metric::InfectionRate: return "InfectionRate";
  case Metric::VaccinationRate: return "VaccinationRate";
  case Metric::TestingRate: return "TestingRate";
  }
  return "?";
}

Metric metric_from_string(std::string_view text)
{
  for (auto m : {Metric::InfectionRate, Metric::VaccinationRate, Metric::TestingRate})
  {
    if (text == to_string(m))
    {
      return m;
    }
  }
  throw ValidationError("unknown metric: " + std::string(text));
}

double two_proportion_z(std::size_t x1, std::size_t n1, std::size_t x2, std::size_t n2)
{
  double p1     = static_cast<double>(x1) / static_cast<double>(n1);
  double p2     = static_cast<double>(x2) / static_cast<double>(n2);
  double pooled = static_cast<double>(x1 + x2) / static_cast<double>(n1 + n2);
  if (pooled <= 0 || pooled >= 1)
  {
    return 0;
  }
  double se = std::sqrt(pooled * (1 - pooled) *
                        (1 / static_cast<double>(n1) + 1 / static_cast<double>(n2)));
  return (p1 - p2) / se;
}

DisparityReport disparity_check(std::vector<HealthRecord> const &records,
                                std::string const &group_field, Metric metric, double threshold)
{
  if (group_field != "demographic_group" && group_field != "geolocation")
  {
    throw ValidationError("unsupported group field: " + group_field);
  }
  std::map<std::string, GroupRate> groups;
  for (auto const &r : records)
  {
    auto const &key = group_field == "geolocation" ? r.geolocation : r.demographic_group;
    auto       &g   = groups[key];
    g.group         = key;
    bool tested     = r.test_result != TestResult::NA;
    switch (metric)
    {
    case Metric::InfectionRate:
      g.total += tested ? 1 : 0;
      g.successes += r.test_result == TestResult::Positive ? 1 : 0;
      break;
    case Metric::VaccinationRate:
      g.total += 1;
      g.successes += r.certificate_type == contracts::CertType::Vaccination ? 1 : 0;
      break;
    case Metric::TestingRate:
      g.total += 1;
      g.successes += tested ? 1 : 0;
      break;
    }
  }
  if (groups.size() < 2)
  {
    throw ValidationError("disparity check needs at least two groups");
  }

  DisparityReport report;
  for (auto &[name, g] : groups)
  {
    if (g.total == 0)
    {
      report.notes.push_back("group '" + name + "' excluded: zero denominator");
      continue;
    }
    g.rate = static_cast<double>(g.successes) / static_cast<double>(g.total);
    report.groups.push_back(g);
  }
  for (std::size_t i = 0; i < report.groups.size(); ++i)
  {
    for (std::size_t j = i + 1; j < report.groups.size(); ++j)
    {
      auto const &a = report.groups[i];
      auto const &b = report.groups[j];
      double      z = two_proportion_z(a.successes, a.total, b.successes, b.total);
      if (std::abs(z) > threshold)
      {
        report.warnings.push_back({a, b, z});
      }
    }
  }
  return report;
}

std::vector<RegionRow> regional_comparison(std::vector<HealthRecord> const &records,
                                           std::map<std::string, double> const &population)
{
  std::map<std::string, std::size_t> cases;
  for (auto const &r : records)
  {
    if (r.test_result == TestResult::Positive)
    {
      ++cases[r.geolocation];
    }
  }
  std::vector<RegionRow> out;
  for (auto const &[region, n] : cases)
  {
    RegionRow row{region, n, std::nullopt};
    if (auto it = population.find(region); it != population.end() && it->second > 0)
    {
      row.per_capita = static_cast<double>(n) / it->second;
    }
    out.push_back(row);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](auto const &a, auto const &b) { return a.cases > b.cases; });
  return out;
}

QualityReport rerun_without_outliers(std::vector<HealthRecord> const &records, std::size_t k,
                                     double cutoff, std::string const &region,
                                     FitConfig const &config)
{
  QualityReport q;
  std::vector<HealthRecord> clean = records;
  if (records.size() > k)
  {
    std::vector<std::vector<double>> pts;
    for (auto const &r : records)
    {
      pts.push_back(features(r));
    }
    q.scores = lof_scores(pts, k);
    clean.clear();
    for (std::size_t i = 0; i < records.size(); ++i)
    {
      if (q.scores[i] > cutoff)
      {
        ++q.excluded;
      }
      else
      {
        clean.push_back(records[i]);
      }
    }
  }
  q.distribution_all   = symptom_distribution(records);
  q.distribution_clean = symptom_distribution(clean);
  auto try_fit = [&](std::vector<HealthRecord> const &rs) -> std::optional<SirFit> {
    auto series = case_series(rs, region);
    if (series.counts.size() < 5)
    {
      return std::nullopt;
    }
    return sir_fit(series, config);
  };
  q.fit_all   = try_fit(records);
  q.fit_clean = try_fit(clean);
  return q;
}

}  // namespace hygiea::analytics
