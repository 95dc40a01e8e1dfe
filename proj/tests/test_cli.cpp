#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using levyflow::cli::run;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "levyflow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("levyflow_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const nlohmann::json& doc, const std::string& name = "config.json") {
    const fs::path p = dir_ / name;
    std::ofstream(p) << doc.dump(2);
    return p;
  }

  fs::path prices(std::size_t n, double sigma, std::uint64_t seed, const std::string& name = "prices.csv") {
    const fs::path p = dir_ / name;
    fixtures::write_price_csv(p, fixtures::gaussian_draws(n, 0.0, sigma, seed));
    return p;
  }

  // A small, quick training setup.
  nlohmann::json small_config(const fs::path& input) const {
    return {{"input", {{"path", input.string()}}},
            {"output_dir", (dir_ / "out").string()},
            {"models",
             {{{"name", "gauss"}, {"family", "gaussian"}},
              {{"name", "vg"}, {"family", "vg"}, {"params", {{"nu", 0.6}}}}}},
            {"flow", {{"layers", 1}, {"bins", 4}}},
            {"train", {{"max_epochs", 3}, {"patience", 2}, {"batch_size", 128}}},
            {"seeds", {0, 1}}};
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UnknownFamilyNamesTheField) {
  const auto cfg = write_config({{"models", {{{"name", "m"}, {"family", "cauchy"}}}}});
  const Result r = invoke({"fit", "--config", cfg.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("models[0].family"), std::string::npos) << r.err;
}

TEST_F(CliTest, ValidationErrorsExitWithOne) {
  const auto input = prices(300, 0.01, 1);
  EXPECT_EQ(invoke({"fit", "--config", write_config({{"bogus", 1}}).string()}).code, 1);
  const Result typed = invoke({"fit", "--config", write_config({{"flow", {{"bins", "eight"}}}}).string()});
  EXPECT_EQ(typed.code, 1);
  EXPECT_NE(typed.err.find("flow.bins"), std::string::npos) << typed.err;
  const Result seeds = invoke({"fit", "--config", write_config({{"seeds", nlohmann::json::array()}}).string()});
  EXPECT_EQ(seeds.code, 1);
  EXPECT_NE(seeds.err.find("seeds"), std::string::npos);
  EXPECT_EQ(invoke({"backtest", "--input", input.string(), "--period", "2001-01-01"}).code, 1);
  EXPECT_EQ(invoke({"backtest", "--input", input.string(), "--period", "2001-05-01:2001-01-01"}).code, 1);
  EXPECT_EQ(invoke({"fit", "--input", input.string(), "--family", "cauchy"}).code, 1);
  EXPECT_EQ(invoke({"nonsense"}).code, 1);
  EXPECT_EQ(invoke({"fit"}).code, 1);  // no input configured
  const Result malformed = invoke({"fit", "--config", [&] {
                                     std::ofstream(dir_ / "bad.json") << "{ not json";
                                     return (dir_ / "bad.json").string();
                                   }()});
  EXPECT_EQ(malformed.code, 1);
}

TEST_F(CliTest, RuntimeFailuresExitWithTwo) {
  const Result missing = invoke({"hill", "--input", (dir_ / "absent.csv").string(), "--out", (dir_ / "o").string()});
  EXPECT_EQ(missing.code, 2);
  const Result no_fits = invoke({"eval", "--input", prices(300, 0.01, 1).string(), "--out", (dir_ / "o").string()});
  EXPECT_EQ(no_fits.code, 2);
  EXPECT_NE(no_fits.err.find("fit"), std::string::npos);
}

TEST_F(CliTest, SampleOfZeroIsRejected) {
  auto doc = small_config(prices(400, 0.01, 2));
  doc["sample"] = {{"n", 0}};
  const Result r = invoke({"sample", "--config", write_config(doc).string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("sample.n"), std::string::npos) << r.err;
}

TEST_F(CliTest, FitWritesOneModelPerSeedAndASummary) {
  auto doc = small_config(prices(800, 0.01, 3));
  doc["seeds"] = {0, 1, 2, 3, 4};
  doc["models"] = {{{"name", "vg_flow"}, {"family", "vg"}}};
  const Result r = invoke({"fit", "--config", write_config(doc).string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path out = dir_ / "out";
  for (int s = 0; s < 5; ++s) EXPECT_TRUE(fs::exists(out / "models" / ("vg_flow_seed" + std::to_string(s) + ".model")));
  const auto summary = read_csv(out / "fit_summary.csv");
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_EQ(summary[0][4], "train_nll_mean");
  EXPECT_EQ(summary[0][7], "test_nll_se");
  EXPECT_EQ(summary[1][0], "vg_flow");
  EXPECT_EQ(summary[1][3], "5");
  EXPECT_GT(std::stod(summary[1][7]), 0.0);

  // The summary mean and standard error agree with the per-seed rows.
  const auto runs = read_csv(out / "fit_runs.csv");
  ASSERT_EQ(runs.size(), 6u);
  std::vector<double> test;
  for (std::size_t i = 1; i < runs.size(); ++i) test.push_back(std::stod(runs[i][10]));
  double mean = 0.0;
  for (double v : test) mean += v / 5.0;
  double ss = 0.0;
  for (double v : test) ss += (v - mean) * (v - mean);
  EXPECT_NEAR(std::stod(summary[1][6]), mean, 1e-12 * std::abs(mean));
  EXPECT_NEAR(std::stod(summary[1][7]), std::sqrt(ss / 4.0) / std::sqrt(5.0), 1e-12);

  EXPECT_TRUE(fs::exists(out / "config.effective.json"));
  EXPECT_TRUE(fs::exists(out / "history" / "vg_flow_seed0.csv"));
  const auto split = nlohmann::json::parse(slurp(out / "fit_split.json"));
  EXPECT_EQ(split["split"]["n_returns"], 800);
}

TEST_F(CliTest, RerunIsByteIdentical) {
  const auto cfg = write_config(small_config(prices(600, 0.01, 4)));
  ASSERT_EQ(invoke({"fit", "--config", cfg.string()}).code, 0);
  const std::string first = slurp(dir_ / "out" / "fit_summary.csv");
  const std::string model = slurp(dir_ / "out" / "models" / "vg_seed1.model");
  ASSERT_EQ(invoke({"fit", "--config", cfg.string()}).code, 0);
  EXPECT_EQ(slurp(dir_ / "out" / "fit_summary.csv"), first);
  EXPECT_EQ(slurp(dir_ / "out" / "models" / "vg_seed1.model"), model);
  auto threaded = small_config(dir_ / "prices.csv");
  threaded["threads"] = 3;
  ASSERT_EQ(invoke({"fit", "--config", write_config(threaded, "threaded.json").string()}).code, 0);
  EXPECT_EQ(slurp(dir_ / "out" / "fit_summary.csv"), first);
}

TEST_F(CliTest, FlagsOverrideConfigAndAreEchoed) {
  const auto cfg = write_config(small_config(prices(600, 0.01, 5)));
  const fs::path other = dir_ / "other";
  ASSERT_EQ(invoke({"fit", "--config", cfg.string(), "--out", other.string(), "--seed", "7", "--family", "vg"}).code, 0);
  EXPECT_TRUE(fs::exists(other / "models" / "vg_seed7.model"));
  EXPECT_FALSE(fs::exists(other / "models" / "gauss_seed7.model"));
  const auto echoed = nlohmann::json::parse(slurp(other / "config.effective.json"));
  EXPECT_EQ(echoed["seeds"], nlohmann::json::array({7}));
  EXPECT_EQ(echoed["models"].size(), 1u);
  EXPECT_EQ(echoed["flow"]["bins"], 4);
}

TEST_F(CliTest, EvalUsesOneCorrectionForEveryModel) {
  const auto cfg = write_config(small_config(prices(600, 0.013, 6)));
  ASSERT_EQ(invoke({"fit", "--config", cfg.string()}).code, 0);
  const Result r = invoke({"eval", "--config", cfg.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(dir_ / "out" / "eval_nll.csv");
  ASSERT_EQ(rows.size(), 1u + 2 * 2 * 3);  // models x seeds x segments
  std::set<std::string> corrections, models;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    corrections.insert(rows[i][6]);
    models.insert(rows[i][0]);
    EXPECT_NEAR(std::stod(rows[i][7]), std::stod(rows[i][5]) + std::stod(rows[i][6]), 1e-12 * std::abs(std::stod(rows[i][7])) + 1e-15);
  }
  EXPECT_EQ(corrections.size(), 1u);
  EXPECT_EQ(models.size(), 2u);
  const auto dens = read_csv(dir_ / "out" / "density_log.csv");
  EXPECT_EQ(dens.size(), 802u);
  EXPECT_EQ(dens[0], (std::vector<std::string>{"x", "gauss", "vg"}));
}

TEST_F(CliTest, SampleWritesDrawsAndQqPairs) {
  auto doc = small_config(prices(600, 0.01, 7));
  doc["sample"] = {{"n", 500}, {"qq_points", 9}};
  const auto cfg = write_config(doc);
  ASSERT_EQ(invoke({"fit", "--config", cfg.string()}).code, 0);
  ASSERT_EQ(invoke({"sample", "--config", cfg.string()}).code, 0);
  const auto draws = read_csv(dir_ / "out" / "samples" / "vg.csv");
  EXPECT_EQ(draws.size(), 501u);
  const auto qq = read_csv(dir_ / "out" / "samples" / "vg_qq.csv");
  ASSERT_EQ(qq.size(), 10u);
  EXPECT_EQ(qq[5][0], "0.5");
  for (std::size_t i = 2; i < qq.size(); ++i) EXPECT_GE(std::stod(qq[i][1]), std::stod(qq[i - 1][1]));
  const std::string first = slurp(dir_ / "out" / "samples" / "vg.csv");
  ASSERT_EQ(invoke({"sample", "--config", cfg.string()}).code, 0);
  EXPECT_EQ(slurp(dir_ / "out" / "samples" / "vg.csv"), first);
}

TEST_F(CliTest, TailcheckPassesBeyondTheBound) {
  const Result r = invoke({"tailcheck", "--out", (dir_ / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err << r.out;
  const std::string report = slurp(dir_ / "out" / "tailcheck.txt");
  EXPECT_EQ(report.find("FAIL"), std::string::npos);
  // Seven default models, five seeds, six probes; plus two slope lines per Student-t fit.
  std::size_t lines = 0;
  for (char c : report) lines += c == '\n';
  EXPECT_EQ(lines, 7u * 5 * 6 + 5 * 2);
  EXPECT_NE(report.find("PASS identity model=vg_flow seed=0 x=5.01"), std::string::npos);
  EXPECT_NE(r.out.find("tailcheck: PASS"), std::string::npos);
  const auto bad = write_config({{"tailcheck", {{"probes", {4.0}}}}});
  EXPECT_EQ(invoke({"tailcheck", "--config", bad.string()}).code, 1);
}

TEST_F(CliTest, HillWritesCurveAndSummary) {
  const fs::path p = dir_ / "returns.csv";
  {
    std::ofstream out(p);
    out << "date,log_return\n";
    const auto pareto = fixtures::pareto_draws(4000, 3.0, 11);
    const auto dates = fixtures::daily_dates(pareto.size());
    for (std::size_t i = 0; i < pareto.size(); ++i) {
      out << levyflow::format_date(dates[i]) << ',' << (i % 2 ? 0.001 : -0.001 * pareto[i]) << '\n';
    }
  }
  const Result r = invoke({"hill", "--input", p.string(), "--format", "returns", "--out", (dir_ / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(slurp(dir_ / "out" / "hill_summary.json"));
  EXPECT_EQ(doc["n_losses"], 2000);
  EXPECT_EQ(doc["k"], 100);
  EXPECT_NEAR(doc["alpha"].get<double>(), 3.0, 4 * 3.0 / 10.0);
  EXPECT_EQ(read_csv(dir_ / "out" / "hill_curve.csv").size(), 1u + 1998);
}

TEST_F(CliTest, BacktestReportShape) {
  auto doc = small_config(prices(1300, 0.01, 8));
  doc["models"] = {{{"name", "gauss"}, {"family", "gaussian"}, {"flow", false}}};
  doc["backtest"] = {{"window", 1000}};
  const auto cfg = write_config(doc);
  const Result r = invoke({"backtest", "--config", cfg.string(), "--period", "2002-10-01:2002-12-31"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(dir_ / "out" / "backtest_summary.csv");
  // Expected rows, then one row per (model, confidence): historical simulation and gauss.
  ASSERT_EQ(rows.size(), 1u + 3 + 2 * 3);
  const std::pair<const char*, int> expected[] = {{"0.95", 15}, {"0.99", 3}, {"0.999", 0}};
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(rows[1 + i][0], "expected");
    EXPECT_EQ(rows[1 + i][1], expected[i].first);
    EXPECT_EQ(rows[1 + i][2], "300");
    EXPECT_EQ(std::stoi(rows[1 + i][3]), expected[i].second);
  }
  std::set<std::pair<std::string, std::string>> keys;
  for (std::size_t i = 4; i < rows.size(); ++i) keys.insert({rows[i][0], rows[i][1]});
  EXPECT_EQ(keys.size(), 6u);
  EXPECT_TRUE(keys.count({"historical_simulation", "0.99"}));
  EXPECT_TRUE(keys.count({"gauss", "0.999"}));
  EXPECT_EQ(rows[5 + 3][11], "green");  // gauss at 99%: n >= 250
  EXPECT_TRUE(fs::exists(dir_ / "out" / "backtest" / "gauss.json"));
  EXPECT_EQ(read_csv(dir_ / "out" / "backtest" / "gauss_forecasts.csv").size(), 1u + 300 * 3);
  EXPECT_EQ(read_csv(dir_ / "out" / "es_summary.csv").size(), 3u);
  EXPECT_EQ(read_csv(dir_ / "out" / "period_summary.csv").size(), 1u + 2 * 3);
}

// Gaussian identity model on i.i.d. Gaussian data: Kupiec should not reject
// at 95% or 99% in at least 18 of 20 seeded runs.
TEST_F(CliTest, GaussianBacktestIsCalibrated) {
  int calibrated = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto doc = small_config(prices(1500, 0.01, 1000 + seed, "p" + std::to_string(seed) + ".csv"));
    doc["models"] = {{{"name", "gauss"}, {"family", "gaussian"}, {"flow", false}}};
    doc["backtest"] = {{"confidences", {0.95, 0.99}}, {"historical_simulation", false}};
    doc["output_dir"] = (dir_ / ("out" + std::to_string(seed))).string();
    const Result r = invoke({"backtest", "--config", write_config(doc).string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = read_csv(dir_ / ("out" + std::to_string(seed)) / "backtest_summary.csv");
    ASSERT_EQ(rows.size(), 5u);
    ASSERT_EQ(rows[3][2], "500");
    calibrated += std::stod(rows[3][7]) > 0.05 && std::stod(rows[4][7]) > 0.05;
  }
  EXPECT_GE(calibrated, 18);
}
