#include "levyflow/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace levyflow {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool is_missing(std::string_view s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "null" || s == ".";
}

bool parse_double(std::string_view s, double& out) {
  // from_chars for double is not available on every toolchain we target.
  std::string buf(s);
  char* end = nullptr;
  out = std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size() && !buf.empty();
}

struct Row {
  Date date;
  double value;
  std::size_t line;
};

}  // namespace

Date parse_date(std::string_view text) {
  text = trim(text);
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw std::invalid_argument("invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)");
  }
  const auto ok = [&](std::size_t pos, std::size_t len, auto& v) {
    const auto r = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    return r.ec == std::errc{} && r.ptr == text.data() + pos + len;
  };
  if (!ok(0, 4, y) || !ok(5, 2, m) || !ok(8, 2, d)) {
    throw std::invalid_argument("invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)");
  }
  const Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw std::invalid_argument("invalid calendar date '" + std::string(text) + "'");
  return date;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

SeriesFormat parse_series_format(std::string_view name) {
  if (name == "prices") return SeriesFormat::prices;
  if (name == "returns") return SeriesFormat::returns;
  throw std::invalid_argument("unknown series format '" + std::string(name) + "' (expected prices or returns)");
}

void ReturnSeries::validate() const {
  if (dates.size() != returns.size()) throw DataError("series: dates and returns differ in length");
  for (std::size_t i = 1; i < dates.size(); ++i) {
    if (!(dates[i - 1] < dates[i])) throw DataError("series: dates must be strictly increasing");
  }
  for (double r : returns) {
    if (!std::isfinite(r)) throw DataError("series: non-finite return");
  }
}

ReturnSeries ReturnSeries::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw std::out_of_range("series slice out of range");
  ReturnSeries s;
  s.dates.assign(dates.begin() + begin, dates.begin() + end);
  s.returns.assign(returns.begin() + begin, returns.begin() + end);
  s.source = source;
  s.symbol = symbol;
  return s;
}

ReturnSeries returns_from_prices(std::span<const Date> dates, std::span<const double> prices) {
  if (dates.size() != prices.size()) throw DataError("prices: dates and prices differ in length");
  ReturnSeries s;
  for (std::size_t i = 1; i < prices.size(); ++i) {
    s.dates.push_back(dates[i]);
    s.returns.push_back(std::log(prices[i] / prices[i - 1]));
  }
  return s;
}

ReturnSeries parse_series(std::string_view text, SeriesFormat format, std::string source) {
  const std::string_view value_column = format == SeriesFormat::prices ? "close" : "log_return";
  std::vector<Row> rows;
  std::vector<Row> seen;  // every dated row, including dropped ones
  std::size_t dropped = 0;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t date_col = 0;
  std::size_t value_col = 1;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }

    if (!header_seen) {
      header_seen = true;
      const auto find = [&](std::string_view name) -> std::size_t {
        for (std::size_t i = 0; i < fields.size(); ++i) {
          if (fields[i] == name) return i;
        }
        throw ParseError(source + ":" + std::to_string(line_no) + ": header must contain columns 'date' and '" +
                             std::string(value_column) + "'",
                         line_no);
      };
      date_col = find("date");
      value_col = find(value_column);
      continue;
    }

    const std::size_t need = std::max(date_col, value_col) + 1;
    if (fields.size() < need) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected at least " + std::to_string(need) +
                           " fields",
                       line_no);
    }
    Date date;
    try {
      date = parse_date(fields[date_col]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    seen.push_back({date, 0.0, line_no});
    const std::string_view cell = fields[value_col];
    double v = 0.0;
    if (is_missing(cell)) {
      if (format == SeriesFormat::prices) {
        ++dropped;
        continue;
      }
      throw ParseError(source + ":" + std::to_string(line_no) + ": missing log_return", line_no);
    }
    if (!parse_double(cell, v) || !std::isfinite(v)) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": cannot parse '" + std::string(cell) + "' as a number",
                       line_no);
    }
    if (format == SeriesFormat::prices && !(v > 0.0)) {
      ++dropped;
      continue;
    }
    rows.push_back({date, v, line_no});
  }
  if (!header_seen) throw ParseError(source + ": empty file", 0);

  const auto by_date = [](const Row& a, const Row& b) { return a.date < b.date; };
  std::stable_sort(seen.begin(), seen.end(), by_date);
  for (std::size_t i = 1; i < seen.size(); ++i) {
    if (seen[i].date == seen[i - 1].date) {
      throw DataError(source + ": duplicate date " + format_date(seen[i].date) + " (lines " +
                      std::to_string(seen[i - 1].line) + " and " + std::to_string(seen[i].line) + ")");
    }
  }
  std::stable_sort(rows.begin(), rows.end(), by_date);
  if (rows.size() < 2) throw DataError(source + ": fewer than 2 usable rows");

  ReturnSeries s;
  if (format == SeriesFormat::prices) {
    std::vector<Date> dates;
    std::vector<double> prices;
    for (const Row& r : rows) {
      dates.push_back(r.date);
      prices.push_back(r.value);
    }
    s = returns_from_prices(dates, prices);
  } else {
    for (const Row& r : rows) {
      s.dates.push_back(r.date);
      s.returns.push_back(r.value);
    }
  }
  s.source = std::move(source);
  s.dropped_rows = dropped;
  s.validate();
  return s;
}

ReturnSeries load_series(const std::filesystem::path& path, SeriesFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  ReturnSeries s = parse_series(buf.str(), format, path.string());
  s.symbol = path.stem().string();
  return s;
}

Standardizer::Standardizer(double mean, double scale, std::size_t fit_count)
    : mean_(mean), scale_(scale), fit_count_(fit_count) {
  if (!std::isfinite(mean) || !(scale > 0.0) || !std::isfinite(scale)) {
    throw DataError("standardizer: scale must be positive and finite");
  }
}

Standardizer Standardizer::fit(std::span<const double> train) {
  if (train.size() < 2) throw DataError("standardizer: need at least 2 training points");
  const double n = static_cast<double>(train.size());
  const double mean = std::accumulate(train.begin(), train.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : train) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const auto [lo, hi] = std::minmax_element(train.begin(), train.end());
  if (*lo == *hi || !(sd > 0.0)) throw DataError("standardizer: training segment has zero variance");
  return Standardizer(mean, sd, train.size());
}

std::vector<double> Standardizer::apply(std::span<const double> xs) const {
  std::vector<double> out(xs.size());
  std::transform(xs.begin(), xs.end(), out.begin(), [this](double x) { return apply(x); });
  return out;
}

std::vector<double> Standardizer::invert(std::span<const double> xs) const {
  std::vector<double> out(xs.size());
  std::transform(xs.begin(), xs.end(), out.begin(), [this](double x) { return invert(x); });
  return out;
}

double Standardizer::log_jacobian() const noexcept { return std::log(scale_); }

double corrected_nll(const FlowModel& model, const Standardizer& s, std::span<const double> raw) {
  if (raw.empty()) throw std::invalid_argument("corrected_nll: empty data");
  double sum = 0.0;
  for (double x : raw) sum += model.log_prob(s.apply(x));
  return -sum / static_cast<double>(raw.size()) + s.log_jacobian();
}

void SplitSpec::validate() const {
  if (fractions.empty()) throw std::invalid_argument("split.fractions must be nonempty");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw std::invalid_argument("split.fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split.fractions must sum to 1");
}

std::vector<Segment> temporal_split(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  std::vector<Segment> out;
  double cum = 0.0;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < spec.fractions.size(); ++i) {
    cum += spec.fractions[i];
    // Tolerance keeps exact decimal products such as 0.7 * 100 from flooring to 69.
    const std::size_t end =
        i + 1 == spec.fractions.size() ? n : std::min(n, static_cast<std::size_t>(std::floor(cum * n + 1e-9)));
    if (end <= begin) throw DataError("temporal_split: segment " + std::to_string(i) + " would be empty");
    out.push_back({begin, end});
    begin = end;
  }
  return out;
}

std::vector<ReturnSeries> temporal_split(const ReturnSeries& series, const SplitSpec& spec) {
  std::vector<ReturnSeries> out;
  for (const Segment& seg : temporal_split(series.size(), spec)) out.push_back(series.slice(seg.begin, seg.end));
  return out;
}

std::vector<RollingWindow> rolling_windows(std::span<const double> returns, std::size_t window, std::size_t step) {
  if (window < 1 || step < 1) throw std::invalid_argument("rolling_windows: window and step must be >= 1");
  if (returns.size() < window + 1) {
    throw DataError("rolling_windows: series of length " + std::to_string(returns.size()) +
                    " is too short for a window of " + std::to_string(window));
  }
  std::vector<RollingWindow> out;
  for (std::size_t i = 0; i + window < returns.size(); i += step) {
    out.push_back({i, returns.subspan(i, window), i + window, returns[i + window]});
  }
  return out;
}

}  // namespace levyflow
