#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "levyflow/data.hpp"
#include "levyflow/flow.hpp"
#include "levyflow/risk.hpp"
#include "levyflow/train.hpp"

namespace levyflow::cli {

/// A configuration or flag value that fails validation.  `field()` is the
/// dotted path of the offending entry, e.g. `models[1].family`.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct ModelEntry {
  std::string name;
  BaseParams base = GaussianParams{};
  bool flow = true;
};

struct RunConfig {
  std::filesystem::path input;
  SeriesFormat format = SeriesFormat::prices;
  std::filesystem::path output_dir = "levyflow-out";
  std::vector<ModelEntry> models;
  FlowShape flow{};
  double init_scale = 0.01;
  TrainConfig train{};
  SplitSpec split{{0.7, 0.15, 0.15}};
  double validation_fraction = 0.15;  // carved from the training segment when the split has two parts
  BacktestConfig backtest{};
  bool historical_simulation = true;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  unsigned threads = 1;
  std::size_t sample_n = 10000;
  std::size_t qq_points = 99;
  std::size_t hill_k = 0;      // 0: ceil(0.05 n)
  std::size_t hill_k_max = 0;  // 0: n - 1
  std::vector<double> tail_probes;  // empty: +-(B + 0.01), +-2B, +-10B
  double tail_tolerance = 1e-12;
  std::size_t density_points = 801;
};

/// The seven models of the reference protocol: two no-flow ablations and
/// five spline flows.
std::vector<ModelEntry> default_models();
RunConfig default_config();

/// Strict: unknown keys and ill-typed values are ConfigErrors naming the field.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const RunConfig& cfg);
void validate(const RunConfig& cfg);

struct Period {
  Date from;
  Date to;
};
/// `YYYY-MM-DD:YYYY-MM-DD`.
Period parse_period(const std::string& text);

struct CommandOptions {
  std::optional<Period> period;
  std::vector<std::filesystem::path> model_files;
};

int cmd_fit(const RunConfig& cfg, std::ostream& log);
int cmd_eval(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_sample(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_backtest(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_tailcheck(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_hill(const RunConfig& cfg, std::ostream& log);

/// Parses arguments, dispatches, and maps failures to exit codes:
/// 0 success, 1 validation error, 2 runtime or numerical failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace levyflow::cli
