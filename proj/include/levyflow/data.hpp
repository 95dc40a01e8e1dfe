#pragma once

#include <chrono>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "levyflow/flow.hpp"

namespace levyflow {

using Date = std::chrono::year_month_day;

/// ISO-8601 `YYYY-MM-DD`; throws std::invalid_argument otherwise.
Date parse_date(std::string_view text);
std::string format_date(const Date& d);

/// Malformed input file; `line()` is 1-based (0 when not tied to a line).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line) : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SeriesFormat { prices, returns };
SeriesFormat parse_series_format(std::string_view name);

struct ReturnSeries {
  std::vector<Date> dates;
  std::vector<double> returns;
  std::string source;
  std::string symbol;
  std::size_t dropped_rows = 0;  // prices with a missing or non-positive value

  std::size_t size() const noexcept { return returns.size(); }
  /// Checks sorted unique dates, equal lengths and finite returns.
  void validate() const;
  ReturnSeries slice(std::size_t begin, std::size_t end) const;
};

/// Reads `date,close` (prices) or `date,log_return` (returns) with a header row.
/// Rows are sorted by date; duplicate dates are an error naming the date.
ReturnSeries load_series(const std::filesystem::path& path, SeriesFormat format);
ReturnSeries parse_series(std::string_view text, SeriesFormat format, std::string source = "<memory>");

/// Log-returns r_t = ln(P_t / P_{t-1}) dated at t.
ReturnSeries returns_from_prices(std::span<const Date> dates, std::span<const double> prices);

/// Affine standardization fit on a training segment only.  Uses the sample
/// (n - 1) standard deviation.
class Standardizer {
 public:
  Standardizer(double mean, double scale, std::size_t fit_count = 0);
  static Standardizer fit(std::span<const double> train);

  double mean() const noexcept { return mean_; }
  double scale() const noexcept { return scale_; }
  std::size_t fit_count() const noexcept { return fit_count_; }

  double apply(double x) const noexcept { return (x - mean_) / scale_; }
  double invert(double x_std) const noexcept { return mean_ + scale_ * x_std; }
  std::vector<double> apply(std::span<const double> xs) const;
  std::vector<double> invert(std::span<const double> xs) const;
  /// ln of the Jacobian of the standardization, added to every standardized NLL.
  double log_jacobian() const noexcept;

 private:
  double mean_;
  double scale_;
  std::size_t fit_count_;
};

/// Mean NLL in raw-return units: -log p(x_std) + ln scale.
double corrected_nll(const FlowModel& model, const Standardizer& s, std::span<const double> raw);

struct SplitSpec {
  std::vector<double> fractions{0.8, 0.2};
  void validate() const;
};

struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

/// Contiguous chronological segments; boundary i is floor(cumulative fraction * n).
std::vector<Segment> temporal_split(std::size_t n, const SplitSpec& spec);
std::vector<ReturnSeries> temporal_split(const ReturnSeries& series, const SplitSpec& spec);

struct RollingWindow {
  std::size_t index = 0;              // first day of the training window
  std::span<const double> train;      // returns[index, index + window)
  std::size_t target_index = 0;       // index + window
  double target = 0.0;
};

/// All (window, next-day) pairs; there are n - window of them.
std::vector<RollingWindow> rolling_windows(std::span<const double> returns, std::size_t window, std::size_t step = 1);

}  // namespace levyflow
