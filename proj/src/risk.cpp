#include "levyflow/risk.hpp"

#include <algorithm>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>

#include "json.hpp"
#include "levyflow/format.hpp"
#include "levyflow/parallel.hpp"
#include "levyflow/special.hpp"

namespace levyflow {

namespace {

constexpr double kNormTolerance = 1e-4;
constexpr double kQuantileTolerance = 1e-8;
constexpr double kInf = std::numeric_limits<double>::infinity();

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

double base_location(const BaseParams& p) {
  return std::visit([](const auto& q) { return q.mu; }, p);
}

// Global adaptive Kronrod: always bisect the interval with the largest error
// estimate.  Boost's single-rule error is reported for the rule mapped onto
// [-1, 1], so it is rescaled by the half-width here; its own recursive driver
// skips that step and over-refines narrow pieces.
template <class F>
double kronrod_global(const F& f, double a, double b, double rel_tol, double abs_tol, int max_intervals) {
  using boost::math::quadrature::gauss_kronrod;
  struct Piece {
    double a, b, value, err;
    bool operator<(const Piece& o) const { return err < o.err; }
  };
  const auto rule = [&](double lo, double hi) {
    double err = 0.0;
    const double v = gauss_kronrod<double, 31>::integrate(f, lo, hi, 0, 0.0, &err);
    return Piece{lo, hi, v, 0.5 * (hi - lo) * err};
  };
  std::priority_queue<Piece> queue;
  Piece first = rule(a, b);
  double value = first.value;
  double err = first.err;
  queue.push(first);
  for (int n = 1; n < max_intervals && err > std::max(abs_tol, rel_tol * std::abs(value)); ++n) {
    const Piece worst = queue.top();
    const double m = 0.5 * (worst.a + worst.b);
    if (!(m > worst.a && m < worst.b)) break;
    queue.pop();
    const Piece left = rule(worst.a, m);
    const Piece right = rule(m, worst.b);
    value += left.value + right.value - worst.value;
    err += left.err + right.err - worst.err;
    queue.push(left);
    queue.push(right);
  }
  return value;
}

template <class F>
double integrate_piece(const F& f, double a, double b) {
  constexpr double rel = 1e-12, abs = 1e-15;
  constexpr int cap = 400;
  if (std::isinf(a) && std::isinf(b)) return integrate_piece(f, a, 0.0) + integrate_piece(f, 0.0, b);
  // Tails: x = b - (1 - t) / t or x = a + (1 - t) / t for t in (0, 1].
  if (std::isinf(a)) {
    return kronrod_global([&](double t) { return f(b - (1.0 - t) / t) / (t * t); }, 0.0, 1.0, rel, abs, cap);
  }
  if (std::isinf(b)) {
    return kronrod_global([&](double t) { return f(a + (1.0 - t) / t) / (t * t); }, 0.0, 1.0, rel, abs, cap);
  }
  return kronrod_global(f, a, b, rel, abs, cap);
}

}  // namespace

ModelRisk::ModelRisk(const FlowModel& model, const Standardizer& standardizer)
    : model_(model), standardizer_(standardizer) {
  const auto& grids = model_.grids();
  std::vector<double> pts;
  for (std::size_t l = 0; l < grids.size(); ++l) {
    for (double x : grids[l].xs) {
      for (std::size_t j = l; j < grids.size(); ++j) x = rqs_forward(grids[j], x).value;
      pts.push_back(x);
    }
  }
  pts.push_back(model_.forward(base_location(model_.base())));
  std::sort(pts.begin(), pts.end());
  for (double x : pts) {
    if (std::isfinite(x) && (breaks_.empty() || x > breaks_.back())) breaks_.push_back(x);
  }

  cum_.push_back(integrate(-kInf, breaks_.front(), false));
  cum1_.push_back(integrate(-kInf, breaks_.front(), true));
  for (std::size_t i = 1; i < breaks_.size(); ++i) {
    cum_.push_back(cum_.back() + integrate(breaks_[i - 1], breaks_[i], false));
    cum1_.push_back(cum1_.back() + integrate(breaks_[i - 1], breaks_[i], true));
  }
  total_ = cum_.back() + integrate(breaks_.back(), kInf, false);
  if (!(std::abs(total_ - 1.0) <= kNormTolerance)) {
    throw QuadratureError("model density integrates to " + std::to_string(total_) + ", not 1");
  }
}

double ModelRisk::density(double x_std) const { return std::exp(model_.log_prob(x_std)); }

double ModelRisk::integrate(double a, double b, bool first_moment) const {
  if (a == b) return 0.0;
  if (first_moment) return integrate_piece([this](double x) { return x * density(x); }, a, b);
  return integrate_piece([this](double x) { return density(x); }, a, b);
}

double ModelRisk::cdf_std(double x) const {
  if (std::isnan(x)) throw std::invalid_argument("cdf: NaN argument");
  if (x <= breaks_.front()) return x == -kInf ? 0.0 : integrate(-kInf, x, false);
  const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - breaks_.begin()) - 1;
  if (x == kInf) return total_;
  return cum_[i] + integrate(breaks_[i], x, false);
}

std::vector<double> ModelRisk::cdf_sorted_std(std::span<const double> xs) const {
  std::vector<double> out;
  out.reserve(xs.size());
  double prev_x = -kInf;
  double prev_c = 0.0;
  std::size_t next_break = 0;
  for (double x : xs) {
    if (x < prev_x) throw std::invalid_argument("cdf_sorted_std: grid must be ascending");
    // Restart from the last break passed so every integral stays on one smooth piece.
    while (next_break < breaks_.size() && breaks_[next_break] <= x) {
      prev_c = cum_[next_break];
      prev_x = breaks_[next_break];
      ++next_break;
    }
    prev_c += prev_x == -kInf && x == -kInf ? 0.0 : integrate(prev_x, x, false);
    prev_x = x;
    out.push_back(prev_c);
  }
  return out;
}

double ModelRisk::quantile_std(double q) const {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile: q must lie in (0, 1)");
  double lo = 0.0;
  double hi = 0.0;
  if (q <= cum_.front()) {
    hi = breaks_.front();
    double step = 1.0;
    lo = hi - step;
    while (cdf_std(lo) > q) {
      hi = lo;
      step *= 2.0;
      lo -= step;
      if (!std::isfinite(lo)) throw QuadratureError("quantile: left tail bracket diverged");
    }
  } else if (q >= cum_.back()) {
    lo = breaks_.back();
    double step = 1.0;
    hi = lo + step;
    while (cdf_std(hi) < q) {
      lo = hi;
      step *= 2.0;
      hi += step;
      if (!std::isfinite(hi)) throw QuadratureError("quantile: right tail bracket diverged");
    }
  } else {
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), q);
    const std::size_t i = static_cast<std::size_t>(it - cum_.begin());
    lo = breaks_[i - 1];
    hi = breaks_[i];
  }
  double mid = 0.5 * (lo + hi);
  double f_mid = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    f_mid = cdf_std(mid);
    if (std::abs(f_mid - q) <= 1e-3 * kQuantileTolerance) break;
    (f_mid < q ? lo : hi) = mid;
    if (hi - lo <= 1e-15 * (1.0 + std::abs(mid))) break;
  }
  if (!(std::abs(f_mid - q) <= kQuantileTolerance)) {
    throw QuadratureError("quantile: bisection stalled at |CDF - q| = " + std::to_string(std::abs(f_mid - q)));
  }
  return mid;
}

double ModelRisk::quantile(double q) const { return standardizer_.invert(quantile_std(q)); }

double ModelRisk::expected_shortfall(double c) const {
  if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("expected_shortfall: c must lie in (0, 1)");
  const double q = 1.0 - c;
  const double v = quantile_std(q);
  double m1 = 0.0;
  if (v <= breaks_.front()) {
    m1 = integrate(-kInf, v, true);
  } else {
    const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), v);
    const std::size_t i = static_cast<std::size_t>(it - breaks_.begin()) - 1;
    m1 = cum1_[i] + integrate(breaks_[i], v, true);
  }
  return standardizer_.invert(m1 / q);
}

double model_quantile(const FlowModel& model, const Standardizer& s, double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("model_quantile: q must lie in (0, 1)");
  return ModelRisk(model, s).quantile(q);
}

double model_es(const FlowModel& model, const Standardizer& s, double c) {
  if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("model_es: c must lie in (0, 1)");
  return ModelRisk(model, s).expected_shortfall(c);
}

VarEs empirical_var_es(std::span<const double> window, double c) {
  if (window.size() < kMinEmpiricalWindow) {
    throw std::invalid_argument("empirical_var_es: window of " + std::to_string(window.size()) +
                                " returns is shorter than " + std::to_string(kMinEmpiricalWindow));
  }
  if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("empirical_var_es: c must lie in (0, 1)");
  std::vector<double> s(window.begin(), window.end());
  std::sort(s.begin(), s.end());
  const double h = static_cast<double>(s.size() - 1) * (1.0 - c);
  const std::size_t j = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(j);
  const double var = j + 1 < s.size() ? s[j] + frac * (s[j + 1] - s[j]) : s[j];
  double excess = 0.0;
  std::size_t m = 0;
  for (double x : s) {
    if (x > var) break;
    excess += x - var;
    ++m;
  }
  return {var, m > 0 ? var + excess / static_cast<double>(m) : var};
}

LrTest kupiec_test(std::size_t x, std::size_t n, double p) {
  if (n == 0 || x > n) throw std::invalid_argument("kupiec_test: need 0 <= x <= n and n >= 1");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("kupiec_test: p must lie in (0, 1)");
  const double nx = static_cast<double>(n - x);
  const double xd = static_cast<double>(x);
  const double phat = xd / static_cast<double>(n);
  const double lr = -2.0 * (xlogy(nx, 1.0 - p) + xlogy(xd, p)) + 2.0 * (xlogy(nx, 1.0 - phat) + xlogy(xd, phat));
  LrTest t;
  t.statistic = std::max(0.0, lr);
  t.p_value = special::chi2_sf(t.statistic, 1);
  t.degenerate = x == 0 || x == n;
  return t;
}

TransitionCounts transition_counts(const std::vector<bool>& hits) {
  TransitionCounts c;
  for (std::size_t t = 1; t < hits.size(); ++t) {
    if (hits[t - 1]) {
      (hits[t] ? c.n11 : c.n10) += 1;
    } else {
      (hits[t] ? c.n01 : c.n00) += 1;
    }
  }
  return c;
}

LrTest christoffersen_test(const std::vector<bool>& hits) {
  if (hits.size() < 2) throw std::invalid_argument("christoffersen_test: need at least 2 observations");
  LrTest t;
  if (std::none_of(hits.begin(), hits.end(), [](bool h) { return h; })) {
    t.degenerate = true;
    return t;
  }
  const TransitionCounts c = transition_counts(hits);
  const double n00 = static_cast<double>(c.n00), n01 = static_cast<double>(c.n01);
  const double n10 = static_cast<double>(c.n10), n11 = static_cast<double>(c.n11);
  const double row0 = n00 + n01;
  const double row1 = n10 + n11;
  t.degenerate = row0 == 0.0 || row1 == 0.0 || c.n11 == 0;
  const double pi01 = row0 > 0.0 ? n01 / row0 : 0.0;
  const double pi11 = row1 > 0.0 ? n11 / row1 : 0.0;
  const double pi = (n01 + n11) / (row0 + row1);
  const double ll0 = xlogy(n00 + n10, 1.0 - pi) + xlogy(n01 + n11, pi);
  const double ll1 = xlogy(n00, 1.0 - pi01) + xlogy(n01, pi01) + xlogy(n10, 1.0 - pi11) + xlogy(n11, pi11);
  t.statistic = std::max(0.0, -2.0 * ll0 + 2.0 * ll1);
  t.p_value = special::chi2_sf(t.statistic, 1);
  return t;
}

std::string_view zone_name(BaselZone z) {
  switch (z) {
    case BaselZone::green: return "green";
    case BaselZone::yellow: return "yellow";
    case BaselZone::red: return "red";
  }
  return "unknown";
}

BaselThresholds basel_thresholds(std::size_t n, double p) {
  if (n < 250) throw std::invalid_argument("basel_zone: needs at least 250 days, got " + std::to_string(n));
  const boost::math::binomial_distribution<double> dist(static_cast<double>(n), p);
  BaselThresholds t;
  std::size_t x = 0;
  while (boost::math::cdf(dist, static_cast<double>(x + 1)) < 0.95) ++x;
  t.green_max = x;
  while (boost::math::cdf(dist, static_cast<double>(x)) < 0.9999) ++x;
  t.red_min = x;
  return t;
}

BaselZone basel_zone(std::size_t violations, std::size_t n) {
  if (violations > n) throw std::invalid_argument("basel_zone: violations exceed days");
  const BaselThresholds t = basel_thresholds(n);
  if (violations <= t.green_max) return BaselZone::green;
  if (violations >= t.red_min) return BaselZone::red;
  return BaselZone::yellow;
}

namespace {

std::vector<double> sorted_descending(std::span<const double> xs) {
  std::vector<double> s(xs.begin(), xs.end());
  for (double v : s) {
    if (!std::isfinite(v)) throw std::invalid_argument("hill: non-finite observation");
  }
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

}  // namespace

double hill_estimator(std::span<const double> losses, std::size_t k) {
  if (k < 2 || k >= losses.size()) {
    throw std::invalid_argument("hill_estimator: need 2 <= k < n (k = " + std::to_string(k) +
                                ", n = " + std::to_string(losses.size()) + ")");
  }
  const std::vector<double> s = sorted_descending(losses);
  const double thr = s[k];
  if (!(thr > 0.0)) throw DegenerateSample("hill_estimator: threshold order statistic is not positive");
  double h = 0.0;
  for (std::size_t i = 0; i < k; ++i) h += std::log(s[i] / thr);
  h /= static_cast<double>(k);
  if (!(h > 0.0)) throw DegenerateSample("hill_estimator: the top k observations are all equal");
  return 1.0 / h;
}

std::vector<HillPoint> hill_curve(std::span<const double> losses, std::size_t k_max) {
  if (losses.size() < 3) throw std::invalid_argument("hill_curve: need at least 3 observations");
  if (k_max == 0) k_max = losses.size() - 1;
  if (k_max < 2 || k_max >= losses.size()) throw std::invalid_argument("hill_curve: need 2 <= k_max < n");
  const std::vector<double> s = sorted_descending(losses);
  std::vector<HillPoint> out;
  out.reserve(k_max - 1);
  double log_sum = 0.0;
  for (std::size_t k = 1; k <= k_max; ++k) {
    if (!(s[k - 1] > 0.0)) break;
    log_sum += std::log(s[k - 1]);
    if (k < 2 || !(s[k] > 0.0)) continue;
    const double h = log_sum / static_cast<double>(k) - std::log(s[k]);
    if (h > 0.0) out.push_back({k, 1.0 / h});
  }
  return out;
}

std::size_t default_hill_k(std::size_t n) {
  if (n < 3) throw std::invalid_argument("default_hill_k: need at least 3 observations");
  const auto k = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 2, n - 1);
}

std::vector<double> loss_magnitudes(std::span<const double> returns) {
  std::vector<double> out;
  for (double r : returns) {
    if (r < 0.0) out.push_back(-r);
  }
  return out;
}

void BacktestConfig::validate() const {
  if (window < kMinEmpiricalWindow) {
    throw std::invalid_argument("backtest.window must be >= " + std::to_string(kMinEmpiricalWindow));
  }
  if (confidences.empty()) throw std::invalid_argument("backtest.confidences must be nonempty");
  for (double c : confidences) {
    if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("backtest.confidences must lie in (0, 1)");
  }
  if (!(es_confidence > 0.0 && es_confidence < 1.0)) {
    throw std::invalid_argument("backtest.es_confidence must lie in (0, 1)");
  }
  if (refit_every < 1) throw std::invalid_argument("backtest.refit_every must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("backtest.validation_fraction must lie in (0, 1)");
  }
  if (threads < 1) throw std::invalid_argument("backtest.threads must be >= 1");
}

ConfidenceRow summarize_hits(const std::vector<bool>& hits, double confidence) {
  ConfidenceRow row;
  row.confidence = confidence;
  row.n = hits.size();
  row.violations = static_cast<std::size_t>(std::count(hits.begin(), hits.end(), true));
  row.rate = static_cast<double>(row.violations) / static_cast<double>(row.n);
  row.expected = static_cast<std::size_t>(std::llround(static_cast<double>(row.n) * (1.0 - confidence)));
  row.kupiec = kupiec_test(row.violations, row.n, 1.0 - confidence);
  row.christoffersen = christoffersen_test(hits);
  if (std::abs(confidence - 0.99) < 1e-12 && row.n >= 250) row.basel = basel_zone(row.violations, row.n);
  return row;
}

std::vector<bool> hit_sequence(const BacktestReport& r, std::size_t ci) {
  std::vector<bool> hits;
  hits.reserve(r.days.size());
  for (const auto& d : r.days) hits.push_back(d.realized < d.var.at(ci));
  return hits;
}

namespace {

struct Forecast {
  std::vector<double> var;
  double es = 0.0;
};

Forecast flow_forecast(const ModelSpec& spec, std::span<const double> window, const BacktestConfig& cfg,
                       std::size_t step) {
  const auto n_train =
      static_cast<std::size_t>(std::floor((1.0 - cfg.validation_fraction) * static_cast<double>(window.size()) + 1e-9));
  if (n_train < 2 || n_train >= window.size()) throw DataError("backtest: window too small to split for validation");
  const auto train_raw = window.first(n_train);
  const auto val_raw = window.subspan(n_train);
  const Standardizer st = Standardizer::fit(train_raw);
  const auto train = st.apply(train_raw);
  const auto val = st.apply(val_raw);
  Rng init = Rng(cfg.seed).split(step);
  FlowModel model = FlowModel::random(spec.base, spec.shape, spec.init_scale, init);
  TrainConfig tc = spec.train;
  tc.seed = init.next_u64();
  if (model.num_parameters() > 0) model = fit(std::move(model), train, val, tc).model;
  const ModelRisk risk(model, st);
  Forecast f;
  for (double c : cfg.confidences) f.var.push_back(risk.value_at_risk(c));
  f.es = risk.expected_shortfall(cfg.es_confidence);
  return f;
}

Forecast historical_forecast(std::span<const double> window, const BacktestConfig& cfg) {
  Forecast f;
  for (double c : cfg.confidences) f.var.push_back(empirical_var_es(window, c).var);
  f.es = empirical_var_es(window, cfg.es_confidence).es;
  return f;
}

}  // namespace

BacktestReport run_backtest(const ModelSpec& spec, const ReturnSeries& series, const BacktestConfig& cfg) {
  cfg.validate();
  series.validate();
  const std::span<const double> returns(series.returns);
  const auto windows = rolling_windows(returns, cfg.window);
  if (windows.size() < 2) throw DataError("backtest: need at least 2 forecast days");

  // Historical simulation updates daily; flows are refit on a cadence.
  const std::size_t cadence = spec.historical_simulation ? 1 : cfg.refit_every;
  std::vector<std::size_t> starts;
  for (std::size_t t = 0; t < windows.size(); t += cadence) starts.push_back(t);
  std::vector<Forecast> forecasts(starts.size());

  const auto work = [&](std::size_t b) {
    const auto& w = windows[starts[b]];
    forecasts[b] = spec.historical_simulation ? historical_forecast(w.train, cfg)
                                              : flow_forecast(spec, w.train, cfg, w.index);
  };
  parallel_for(starts.size(), cfg.threads, work);

  BacktestReport report;
  report.model = spec.name;
  report.config = cfg;
  report.config.refit_every = cadence;
  report.refits = starts.size();
  for (std::size_t t = 0; t < windows.size(); ++t) {
    const Forecast& f = forecasts[t / cadence];
    DayForecast d;
    d.index = windows[t].target_index;
    d.date = series.dates.empty() ? Date{} : series.dates[d.index];
    d.realized = windows[t].target;
    d.var = f.var;
    d.es = f.es;
    d.refit = t % cadence == 0;
    report.days.push_back(std::move(d));
  }
  for (std::size_t ci = 0; ci < cfg.confidences.size(); ++ci) {
    report.rows.push_back(summarize_hits(hit_sequence(report, ci), cfg.confidences[ci]));
  }
  if (report.days.size() >= kMinEmpiricalWindow) {
    std::vector<double> realized;
    double es_sum = 0.0;
    for (const auto& d : report.days) {
      realized.push_back(d.realized);
      es_sum += d.es;
    }
    EsComparison es;
    es.confidence = cfg.es_confidence;
    es.model_es = es_sum / static_cast<double>(report.days.size());
    const VarEs emp = empirical_var_es(realized, cfg.es_confidence);
    es.empirical_var = emp.var;
    es.empirical_es = emp.es;
    es.underestimation = (es.model_es - emp.es) / std::abs(emp.es);
    report.es = es;
  }
  return report;
}

PeriodSummary summarize_period(const BacktestReport& r, Date from, Date to) {
  if (to < from) throw std::invalid_argument("period: end date precedes start date");
  PeriodSummary s;
  s.from = from;
  s.to = to;
  for (std::size_t ci = 0; ci < r.config.confidences.size(); ++ci) {
    PeriodRow row;
    row.confidence = r.config.confidences[ci];
    row.worst_realized = kInf;
    row.min_var = kInf;
    for (const auto& d : r.days) {
      if (d.date < from || to < d.date) continue;
      ++row.days;
      if (d.realized < d.var[ci]) ++row.violations;
      if (d.realized < row.worst_realized) {
        row.worst_realized = d.realized;
        row.worst_date = d.date;
        row.var_on_worst_day = d.var[ci];
      }
      row.min_var = std::min(row.min_var, d.var[ci]);
    }
    if (row.days == 0) throw DataError("period: no forecast days between " + format_date(from) + " and " + format_date(to));
    s.rows.push_back(row);
  }
  return s;
}

namespace {

nlohmann::ordered_json lr_json(const LrTest& t) {
  return {{"lr", t.statistic}, {"p_value", t.p_value}, {"degenerate", t.degenerate}};
}

}  // namespace

void BacktestReport::write_json(std::ostream& os) const {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["model"] = model;
  doc["window"] = config.window;
  doc["refit_every"] = config.refit_every;
  doc["validation_fraction"] = config.validation_fraction;
  doc["seed"] = config.seed;
  doc["refits"] = refits;
  doc["forecast_days"] = days.size();
  if (!days.empty()) {
    doc["first_date"] = format_date(days.front().date);
    doc["last_date"] = format_date(days.back().date);
  }
  doc["hit_rule"] = "realized < var";
  ordered_json rows_json = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json j;
    j["confidence"] = r.confidence;
    j["n"] = r.n;
    j["violations"] = r.violations;
    j["rate"] = r.rate;
    j["expected"] = r.expected;
    j["expected_rate"] = 1.0 - r.confidence;
    j["kupiec"] = lr_json(r.kupiec);
    j["christoffersen"] = lr_json(r.christoffersen);
    j["basel_zone"] = r.basel ? ordered_json(std::string(zone_name(*r.basel))) : ordered_json(nullptr);
    rows_json.push_back(std::move(j));
  }
  doc["confidence_rows"] = std::move(rows_json);
  if (es) {
    doc["expected_shortfall"] = {{"confidence", es->confidence},
                                 {"model_es", es->model_es},
                                 {"empirical_var", es->empirical_var},
                                 {"empirical_es", es->empirical_es},
                                 {"underestimation", es->underestimation}};
  }
  if (period) {
    ordered_json p;
    p["illustrative"] = true;
    p["from"] = format_date(period->from);
    p["to"] = format_date(period->to);
    ordered_json prow = ordered_json::array();
    for (const auto& r : period->rows) {
      prow.push_back({{"confidence", r.confidence},
                      {"days", r.days},
                      {"violations", r.violations},
                      {"worst_date", format_date(r.worst_date)},
                      {"worst_realized", r.worst_realized},
                      {"var_on_worst_day", r.var_on_worst_day},
                      {"min_var", r.min_var}});
    }
    p["rows"] = std::move(prow);
    doc["period"] = std::move(p);
  }
  os << doc.dump(2) << '\n';
}

void BacktestReport::write_csv(std::ostream& os) const {
  os << "date,confidence,var,realized,hit\n";
  for (const auto& d : days) {
    for (std::size_t ci = 0; ci < d.var.size(); ++ci) {
      os << format_date(d.date) << ',' << format_double(config.confidences[ci]) << ',' << format_double(d.var[ci])
         << ',' << format_double(d.realized) << ',' << (d.realized < d.var[ci] ? 1 : 0) << '\n';
    }
  }
}

}  // namespace levyflow
