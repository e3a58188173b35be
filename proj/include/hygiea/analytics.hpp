#pragma once

// Consented health-record store and the statistics run over it: symptom
// distributions, SIR fitting and forecasting, SPRT change detection, local
// outlier factor, and group disparity warnings.

#include "hygiea/contracts.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hygiea::analytics {

class ValidationError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

class StateError : public std::logic_error
{
public:
  using std::logic_error::logic_error;
};

inline constexpr std::size_t kSymptomCount = 12;

inline constexpr std::array<std::string_view, kSymptomCount> kSymptoms{
    "fever_or_chills", "cough",        "shortness_of_breath", "fatigue",
    "muscle_aches",    "headache",     "loss_of_smell",       "loss_of_taste",
    "sore_throat",     "congestion",   "nausea_or_vomiting",  "diarrhea",
};

enum class TestResult
{
  Positive,
  Negative,
  NA,
};

std::string_view to_string(TestResult r);
TestResult       test_result_from_string(std::string_view text);

using Day = std::int64_t;  // days since 1970-01-01

// "YYYY-MM-DD" <-> day number.
Day         parse_date(std::string_view text);
std::string format_date(Day day);

// Two upper-case letters, optionally followed by '-' and 1-3 upper-case
// letters or digits (e.g. "CY", "CY-01").
bool valid_region_code(std::string_view code);

// No name or document fields exist here by construction.
struct HealthRecord
{
  std::array<bool, kSymptomCount> symptoms{};
  unsigned                         age{0};
  std::string                      geolocation;
  std::vector<std::string>         travel_history;
  unsigned                         past_infections{0};
  TestResult                       test_result{TestResult::NA};
  std::string                      demographic_group;
  bool                             consent{false};
  Day                              observed_at{0};
  // Type of certificate issued alongside the record, when there was one.
  std::optional<contracts::CertType> certificate_type;

  bool operator==(HealthRecord const &) const = default;
};

// Throws ValidationError for malformed region codes.
void validate(HealthRecord const &record);

// Strict: unknown keys anywhere (including symptom names) are errors.
HealthRecord   record_from_json(nlohmann::json const &j);
nlohmann::json to_json(HealthRecord const &record);

class RecordStore
{
public:
  // Validates, then keeps the record only if it carries consent.
  bool ingest(HealthRecord const &record);

  std::vector<HealthRecord> const &records() const { return records_; }
  std::size_t                      size() const { return records_.size(); }

private:
  std::vector<HealthRecord> records_;
};

// One JSON record per line; blank lines are skipped. Errors name the line.
RecordStore load_jsonl(std::string_view text);
std::string to_jsonl(RecordStore const &store);

using RecordFilter = std::function<bool(HealthRecord const &)>;

struct SymptomRow
{
  std::string   symptom;
  std::size_t   count{0};
  double        proportion{0};
};

// Empty when no record passes the filter.
std::vector<SymptomRow> symptom_distribution(std::vector<HealthRecord> const &records,
                                             RecordFilter const &filter = {});

struct SirState
{
  double S{0};
  double I{0};
  double R{0};
};

struct SirParams
{
  double   beta{0};
  double   gamma{0};
  double   N{0};
  SirState initial;
};

// Throws ValidationError unless beta, gamma >= 0, N > 0 and the initial
// compartments are non-negative and sum to N.
void validate(SirParams const &params);

// One explicit Euler step of dS = -bSI/N, dI = bSI/N - gI, dR = gI.
SirState sir_step(SirParams const &params, SirState const &state, double dt);

struct CaseSeries
{
  std::string                           region;
  std::vector<std::pair<Day, double>>   counts;  // (day, new cases)
};

// Throws ValidationError unless days strictly increase and counts are >= 0.
void validate(CaseSeries const &series);

// Daily Positive counts for the region (all regions when empty), zero-filled
// between the first and last observation day.
CaseSeries case_series(std::vector<HealthRecord> const &records, std::string const &region);

// Model new cases for days start_day .. start_day + horizon - 1; the state
// before start_day is params.initial.
CaseSeries sir_forecast(SirParams const &params, std::size_t horizon, Day start_day = 1,
                        double dt = 1.0);

struct FitConfig
{
  double N{1000};
  double I0{1};
  double R0{0};
  double dt{1.0};
  int    grid_steps{100};  // grid spacing 1 / grid_steps over [0, 1]
  double tolerance{1e-9};  // golden-section stopping width
};

struct SirFit
{
  SirParams params;
  double    sse{0};
  bool      degenerate{false};
};

// Sum of squared errors between the series and model new cases, the model
// starting the day before the first observation.
double sir_sse(CaseSeries const &series, double beta, double gamma, FitConfig const &config);

// Grid search over beta, gamma in [0, 1] (ties to smaller beta, then smaller
// gamma), then golden-section refinement along each axis inside one grid
// cell. Throws ValidationError for fewer than 5 observations.
SirFit sir_fit(CaseSeries const &series, FitConfig const &config);

enum class SprtDecision
{
  Continue,
  AcceptH0,
  AcceptH1,
};

std::string_view to_string(SprtDecision d);

struct SprtState
{
  double       p0{0.1};
  double       p1{0.3};
  double       alpha{0.05};
  double       beta_err{0.05};
  double       log_lr{0};
  std::size_t  positives{0};
  std::size_t  negatives{0};
  SprtDecision decision{SprtDecision::Continue};
};

// Validates 0 < p0 < p1 < 1 and 0 < alpha, beta_err < 0.5.
SprtState sprt_init(double p0, double p1, double alpha, double beta_err);

// Throws StateError once a decision has been reached.
SprtState sprt_update(SprtState const &state, bool positive);

// Classical local outlier factor. Neighbourhoods include every point tied at
// the k-distance; reachability means are floored so duplicates stay finite.
// Throws ValidationError unless 2 <= points, 1 <= k < points and all points
// share a dimension.
std::vector<double> lof_scores(std::vector<std::vector<double>> const &points, std::size_t k);

// Per-record features used for outlier screening: age, past infections,
// symptom count, number of travel destinations.
std::vector<double> features(HealthRecord const &record);

enum class Metric
{
  InfectionRate,    // Positive among tested
  VaccinationRate,  // vaccination certificates among all records
  TestingRate,      // tested among all records
};

std::string_view to_string(Metric m);
Metric           metric_from_string(std::string_view text);

struct GroupRate
{
  std::string group;
  std::size_t successes{0};
  std::size_t total{0};
  double      rate{0};
};

struct DisparityWarning
{
  GroupRate a;
  GroupRate b;
  double    z{0};
};

struct DisparityReport
{
  std::vector<GroupRate>        groups;    // included groups, by name
  std::vector<DisparityWarning> warnings;
  std::vector<std::string>      notes;     // excluded groups
};

// Pooled two-proportion z-test between every pair of groups. group_field is
// "demographic_group" or "geolocation". Throws ValidationError when fewer
// than two groups are present.
DisparityReport disparity_check(std::vector<HealthRecord> const &records,
                                std::string const &group_field, Metric metric, double threshold);

// Two-proportion z statistic with pooled variance; 0 when the pooled rate is
// 0 or 1.
double two_proportion_z(std::size_t x1, std::size_t n1, std::size_t x2, std::size_t n2);

struct RegionRow
{
  std::string           region;
  std::size_t           cases{0};
  std::optional<double> per_capita;
};

// Positive records per region, most cases first (ties by region name).
std::vector<RegionRow> regional_comparison(std::vector<HealthRecord> const &records,
                                           std::map<std::string, double> const &population = {});

struct QualityReport
{
  std::vector<double>      scores;
  std::size_t              excluded{0};
  std::vector<SymptomRow>  distribution_all;
  std::vector<SymptomRow>  distribution_clean;
  std::optional<SirFit>    fit_all;
  std::optional<SirFit>    fit_clean;
};

// Scores every record with LOF and repeats the distribution and (when the
// series is long enough) the SIR fit without records scoring above cutoff.
QualityReport rerun_without_outliers(std::vector<HealthRecord> const &records, std::size_t k,
                                     double cutoff, std::string const &region,
                                     FitConfig const &config);

// Output helpers: numbers at 6 significant digits.
std::string format_number(double value);
double      round_sig6(double value);

std::string    distribution_csv(std::vector<SymptomRow> const &rows);
std::string    regions_csv(std::vector<RegionRow> const &rows);
std::string    series_csv(CaseSeries const &series);
std::string    scores_csv(std::vector<double> const &scores);
nlohmann::json to_json(SirFit const &fit);
nlohmann::json to_json(SprtState const &state);
nlohmann::json to_json(DisparityReport const &report);
nlohmann::json to_json(QualityReport const &report);

}  // namespace hygiea::analytics
