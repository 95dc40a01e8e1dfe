#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "levyflow/data.hpp"
#include "levyflow/flow.hpp"
#include "levyflow/train.hpp"

namespace levyflow {

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Distribution of a fitted flow in raw-return units, backed by a cumulative
/// quadrature table over the pieces on which the density is smooth: the
/// images of every spline knot through the later layers, plus the image of
/// the base location.  Tails are integrated over infinite intervals.
class ModelRisk {
 public:
  /// Throws QuadratureError if the density does not integrate to 1 +/- 1e-4.
  ModelRisk(const FlowModel& model, const Standardizer& standardizer);

  double total_mass() const noexcept { return total_; }

  /// CDF at a standardized point, and at a raw return.
  double cdf_std(double x_std) const;
  double cdf(double x_raw) const { return cdf_std(standardizer_.apply(x_raw)); }
  /// CDF at every point of a sorted standardized grid in one sweep.
  std::vector<double> cdf_sorted_std(std::span<const double> sorted_x_std) const;

  /// Lower q-quantile (raw units), bisected to |CDF - q| <= 1e-8.
  double quantile(double q) const;
  /// VaR at confidence c is the (1 - c) quantile; returned as a signed return.
  double value_at_risk(double c) const { return quantile(1.0 - c); }
  /// E[X | X < VaR_c] in raw units.
  double expected_shortfall(double c) const;

  const Standardizer& standardizer() const noexcept { return standardizer_; }

 private:
  double density(double x_std) const;
  double integrate(double a, double b, bool first_moment) const;
  double quantile_std(double q) const;

  FlowModel model_;
  Standardizer standardizer_;
  std::vector<double> breaks_;  // standardized, strictly increasing
  std::vector<double> cum_;     // mass of (-inf, breaks_[i]]
  std::vector<double> cum1_;    // first moment of (-inf, breaks_[i]]
  double total_ = 0.0;
};

double model_quantile(const FlowModel& model, const Standardizer& s, double q);
double model_es(const FlowModel& model, const Standardizer& s, double c);

struct VarEs {
  double var = 0.0;
  double es = 0.0;
};

/// Linear-interpolation quantile at 1 - c (order-statistic position (n - 1) q)
/// and the mean of the returns at or below it.  Needs at least 50 returns.
VarEs empirical_var_es(std::span<const double> window, double c);
constexpr std::size_t kMinEmpiricalWindow = 50;

struct LrTest {
  double statistic = 0.0;
  double p_value = 1.0;
  bool degenerate = false;
};

LrTest kupiec_test(std::size_t violations, std::size_t n, double p);

struct TransitionCounts {
  std::size_t n00 = 0, n01 = 0, n10 = 0, n11 = 0;
};
TransitionCounts transition_counts(const std::vector<bool>& hits);
/// Independence LR.  No violations gives (0, 1) flagged degenerate; other
/// empty transition rows contribute zero and also set the flag.
LrTest christoffersen_test(const std::vector<bool>& hits);

enum class BaselZone { green, yellow, red };
std::string_view zone_name(BaselZone z);
struct BaselThresholds {
  std::size_t green_max = 0;  // largest x with Binomial(n, 0.01) CDF < 0.95
  std::size_t red_min = 0;    // smallest x with CDF >= 0.9999
};
/// Requires n >= 250.
BaselThresholds basel_thresholds(std::size_t n, double p = 0.01);
BaselZone basel_zone(std::size_t violations, std::size_t n);

class DegenerateSample : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HillPoint {
  std::size_t k = 0;
  double alpha = 0.0;
};

/// Tail index from the k largest observations.
double hill_estimator(std::span<const double> losses, std::size_t k);
/// alpha(k) for k = 2..k_max (k_max = 0 means n - 1).  Points with a tied
/// threshold are skipped.
std::vector<HillPoint> hill_curve(std::span<const double> losses, std::size_t k_max = 0);
std::size_t default_hill_k(std::size_t n);
/// Magnitudes of the negative returns.
std::vector<double> loss_magnitudes(std::span<const double> returns);

// ---------------------------------------------------------------------------
// Rolling backtest

struct ModelSpec {
  std::string name;
  bool historical_simulation = false;
  BaseParams base = GaussianParams{};
  FlowShape shape{};
  double init_scale = 0.01;
  TrainConfig train{};
};

struct BacktestConfig {
  std::size_t window = 1000;
  std::vector<double> confidences{0.95, 0.99, 0.999};
  std::size_t refit_every = 20;
  double validation_fraction = 0.15;
  double es_confidence = 0.99;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

struct ConfidenceRow {
  double confidence = 0.0;
  std::size_t n = 0;
  std::size_t violations = 0;
  double rate = 0.0;
  std::size_t expected = 0;  // round(n (1 - c))
  LrTest kupiec;
  LrTest christoffersen;
  std::optional<BaselZone> basel;  // 99% row with n >= 250 only
};

struct EsComparison {
  double confidence = 0.99;
  double model_es = 0.0;      // mean of the daily ES forecasts
  double empirical_var = 0.0;  // over realized test-period returns
  double empirical_es = 0.0;
  double underestimation = 0.0;  // (model - empirical) / |empirical|; > 0 means too shallow
};

struct DayForecast {
  std::size_t index = 0;  // position in the series
  Date date{};
  double realized = 0.0;
  std::vector<double> var;  // one per configured confidence
  double es = 0.0;
  bool refit = false;
};

struct PeriodRow {
  double confidence = 0.0;
  std::size_t days = 0;
  std::size_t violations = 0;
  Date worst_date{};
  double worst_realized = 0.0;
  double var_on_worst_day = 0.0;
  double min_var = 0.0;
};

struct PeriodSummary {
  Date from{};
  Date to{};
  std::vector<PeriodRow> rows;
};

struct BacktestReport {
  std::string model;
  BacktestConfig config;
  std::size_t refits = 0;
  std::vector<DayForecast> days;
  std::vector<ConfidenceRow> rows;
  std::optional<EsComparison> es;  // needs at least 50 forecast days
  std::optional<PeriodSummary> period;

  /// Structured document with every statistic at full precision.
  void write_json(std::ostream& os) const;
  /// Flat table `date,confidence,var,realized,hit`.
  void write_csv(std::ostream& os) const;
};

std::vector<bool> hit_sequence(const BacktestReport& r, std::size_t confidence_index);
ConfidenceRow summarize_hits(const std::vector<bool>& hits, double confidence);

/// Rolling one-day-ahead forecasts over every day after the first window.
/// Flow models are refit from a fresh initialization every `refit_every` days
/// and carried (with their standardizer) in between.
BacktestReport run_backtest(const ModelSpec& spec, const ReturnSeries& series, const BacktestConfig& cfg);

/// Illustrative crisis-window view of an existing report.
PeriodSummary summarize_period(const BacktestReport& r, Date from, Date to);

}  // namespace levyflow
