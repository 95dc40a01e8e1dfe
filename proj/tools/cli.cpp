#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "levyflow/format.hpp"
#include "levyflow/model_io.hpp"
#include "levyflow/parallel.hpp"

namespace levyflow::cli {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string num(double v) { return format_double(v); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// --- strict JSON readers ----------------------------------------------------

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& item : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; })) {
      throw ConfigError(path.empty() ? item.key() : path + "." + item.key(), "unknown field");
    }
  }
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void read(const json& obj, const std::string& path, const char* key, double& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(join(path, key), "expected a number");
  out = v.get<double>();
  if (!std::isfinite(out)) throw ConfigError(join(path, key), "must be finite");
}

template <class Int>
void read(const json& obj, const std::string& path, const char* key, Int& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(join(path, key), "expected a non-negative integer");
  }
  out = static_cast<Int>(v.get<unsigned long long>());
}

void read(const json& obj, const std::string& path, const char* key, bool& out) {
  if (!obj.contains(key)) return;
  if (!obj.at(key).is_boolean()) throw ConfigError(join(path, key), "expected true or false");
  out = obj.at(key).get<bool>();
}

void read(const json& obj, const std::string& path, const char* key, std::string& out) {
  if (!obj.contains(key)) return;
  if (!obj.at(key).is_string()) throw ConfigError(join(path, key), "expected a string");
  out = obj.at(key).get<std::string>();
}

void read(const json& obj, const std::string& path, const char* key, std::vector<double>& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(join(path, key), "expected an array of numbers");
  out.clear();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(join(path, key) + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(v[i].get<double>());
  }
}

ModelEntry parse_model(const json& j, const std::string& path) {
  check_keys(j, path, {"name", "family", "params", "flow"});
  ModelEntry m;
  std::string family;
  read(j, path, "name", m.name);
  read(j, path, "family", family);
  read(j, path, "flow", m.flow);
  if (m.name.empty()) throw ConfigError(path + ".name", "required");
  if (family.empty()) throw ConfigError(path + ".family", "required");
  Family f{};
  try {
    f = parse_family(family);
  } catch (const std::exception&) {
    throw ConfigError(path + ".family", "unknown family '" + family + "' (expected gaussian, student_t, vg or nig)");
  }
  std::map<std::string, double> fields;
  if (j.contains("params")) {
    const json& p = j.at("params");
    if (!p.is_object()) throw ConfigError(path + ".params", "expected an object");
    for (const auto& item : p.items()) {
      if (!item.value().is_number()) throw ConfigError(path + ".params." + item.key(), "expected a number");
      fields[item.key()] = item.value().get<double>();
    }
  }
  try {
    m.base = params_from_fields(f, fields);
  } catch (const std::exception& e) {
    throw ConfigError(path + ".params", e.what());
  }
  return m;
}

// --- shared pipeline pieces -------------------------------------------------

struct Prepared {
  ReturnSeries series;
  std::vector<Segment> segments;  // train, validation, test
  Standardizer standardizer{0.0, 1.0};

  std::span<const double> segment(std::size_t i) const {
    return std::span<const double>(series.returns).subspan(segments[i].begin, segments[i].size());
  }
};

Prepared prepare(const RunConfig& cfg) {
  if (cfg.input.empty()) throw ConfigError("input.path", "required (set it in the config or pass --input)");
  Prepared p;
  p.series = load_series(cfg.input, cfg.format);
  auto segs = temporal_split(p.series.size(), cfg.split);
  if (segs.size() == 2) {
    const Segment train = segs[0];
    const auto n_fit = static_cast<std::size_t>(
        std::floor((1.0 - cfg.validation_fraction) * static_cast<double>(train.size()) + 1e-9));
    if (n_fit < 2 || n_fit >= train.size()) throw DataError("training segment too short to carve a validation set");
    segs = {{train.begin, train.begin + n_fit}, {train.begin + n_fit, train.end}, segs[1]};
  }
  p.segments = segs;
  p.standardizer = Standardizer::fit(p.segment(0));
  return p;
}

FlowModel initial_model(const ModelEntry& m, const RunConfig& cfg, std::uint64_t seed) {
  if (!m.flow) return FlowModel::identity(m.base, {0, cfg.flow.bins, cfg.flow.bound});
  Rng rng(seed);
  return FlowModel::random(m.base, cfg.flow, cfg.init_scale, rng);
}

fs::path model_path(const RunConfig& cfg, const std::string& name, std::uint64_t seed) {
  return cfg.output_dir / "models" / (name + "_seed" + std::to_string(seed) + ".model");
}

struct LoadedModel {
  std::string name;
  std::uint64_t seed = 0;
  ModelDocument doc;
};

/// Explicit --model files, otherwise the fitted documents for every
/// configured model and seed.
std::vector<LoadedModel> fitted_models(const RunConfig& cfg, const CommandOptions& opts, bool first_seed_only) {
  std::vector<LoadedModel> out;
  if (!opts.model_files.empty()) {
    for (const auto& f : opts.model_files) out.push_back({f.stem().string(), cfg.seeds.front(), load_model(f)});
    return out;
  }
  for (const auto& m : cfg.models) {
    for (std::uint64_t seed : cfg.seeds) {
      const fs::path path = model_path(cfg, m.name, seed);
      if (!fs::exists(path)) {
        throw std::runtime_error("missing fitted model " + path.string() + " (run `fit` first or pass --model)");
      }
      out.push_back({m.name, seed, load_model(path)});
      if (first_seed_only) break;
    }
  }
  return out;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

std::string se_field(const std::vector<double>& v) {
  if (v.size() < 2) return "";
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return num(std::sqrt(ss / (v.size() - 1)) / std::sqrt(static_cast<double>(v.size())));
}

double type7_quantile(const std::vector<double>& sorted, double p) {
  const double h = (sorted.size() - 1) * p;
  const auto j = static_cast<std::size_t>(std::floor(h));
  if (j + 1 >= sorted.size()) return sorted.back();
  return sorted[j] + (h - j) * (sorted[j + 1] - sorted[j]);
}

ordered_json split_json(const Prepared& p) {
  ordered_json s;
  s["n_returns"] = p.series.size();
  s["dropped_rows"] = p.series.dropped_rows;
  const char* names[] = {"train", "validation", "test"};
  for (std::size_t i = 0; i < 3; ++i) {
    const Segment seg = p.segments[i];
    s[names[i]] = {{"begin", seg.begin},
                   {"end", seg.end},
                   {"first_date", format_date(p.series.dates[seg.begin])},
                   {"last_date", format_date(p.series.dates[seg.end - 1])}};
  }
  s["standardizer"] = {{"mean", p.standardizer.mean()},
                       {"scale", p.standardizer.scale()},
                       {"ddof", 1},
                       {"fit_count", p.standardizer.fit_count()},
                       {"log_scale_correction", p.standardizer.log_jacobian()}};
  return s;
}

}  // namespace

// --- configuration ----------------------------------------------------------

std::vector<ModelEntry> default_models() {
  return {
      {"vg_only", VgParams{}, false},
      {"nig_only", NigParams{}, false},
      {"gaussian_flow", GaussianParams{}, true},
      {"student_t_flow", StudentTParams{}, true},
      {"light_tail_flow", GaussianParams{0.0, 0.5}, true},
      {"vg_flow", VgParams{}, true},
      {"nig_flow", NigParams{}, true},
  };
}

RunConfig default_config() {
  RunConfig c;
  c.models = default_models();
  return c;
}

RunConfig parse_config(const json& doc) {
  RunConfig c = default_config();
  check_keys(doc, "", {"input", "output_dir", "models", "flow", "train", "split", "backtest", "seeds", "threads",
                       "sample", "hill", "tailcheck", "eval"});
  if (doc.contains("input")) {
    const json& in = doc.at("input");
    check_keys(in, "input", {"path", "format"});
    std::string path = c.input.string();
    std::string format = "prices";
    read(in, "input", "path", path);
    read(in, "input", "format", format);
    c.input = path;
    try {
      c.format = parse_series_format(format);
    } catch (const std::exception& e) {
      throw ConfigError("input.format", e.what());
    }
  }
  if (doc.contains("output_dir")) {
    std::string out;
    read(doc, "", "output_dir", out);
    c.output_dir = out;
  }
  if (doc.contains("models")) {
    const json& ms = doc.at("models");
    if (!ms.is_array()) throw ConfigError("models", "expected an array");
    c.models.clear();
    for (std::size_t i = 0; i < ms.size(); ++i) c.models.push_back(parse_model(ms[i], "models[" + std::to_string(i) + "]"));
  }
  if (doc.contains("flow")) {
    const json& f = doc.at("flow");
    check_keys(f, "flow", {"layers", "bins", "bound", "init_scale"});
    read(f, "flow", "layers", c.flow.layers);
    read(f, "flow", "bins", c.flow.bins);
    read(f, "flow", "bound", c.flow.bound);
    read(f, "flow", "init_scale", c.init_scale);
  }
  if (doc.contains("train")) {
    const json& t = doc.at("train");
    check_keys(t, "train", {"learning_rate", "batch_size", "max_epochs", "patience", "beta1", "beta2", "epsilon"});
    read(t, "train", "learning_rate", c.train.learning_rate);
    read(t, "train", "batch_size", c.train.batch_size);
    read(t, "train", "max_epochs", c.train.max_epochs);
    read(t, "train", "patience", c.train.patience);
    read(t, "train", "beta1", c.train.beta1);
    read(t, "train", "beta2", c.train.beta2);
    read(t, "train", "epsilon", c.train.epsilon);
  }
  if (doc.contains("split")) {
    const json& s = doc.at("split");
    check_keys(s, "split", {"fractions", "validation_fraction"});
    read(s, "split", "fractions", c.split.fractions);
    read(s, "split", "validation_fraction", c.validation_fraction);
  }
  if (doc.contains("backtest")) {
    const json& b = doc.at("backtest");
    check_keys(b, "backtest", {"window", "confidences", "refit_every", "validation_fraction", "es_confidence",
                               "historical_simulation"});
    read(b, "backtest", "window", c.backtest.window);
    read(b, "backtest", "confidences", c.backtest.confidences);
    read(b, "backtest", "refit_every", c.backtest.refit_every);
    read(b, "backtest", "validation_fraction", c.backtest.validation_fraction);
    read(b, "backtest", "es_confidence", c.backtest.es_confidence);
    read(b, "backtest", "historical_simulation", c.historical_simulation);
  }
  if (doc.contains("seeds")) {
    const json& s = doc.at("seeds");
    if (!s.is_array()) throw ConfigError("seeds", "expected an array of non-negative integers");
    c.seeds.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s[i].is_number_integer() || s[i].get<long long>() < 0) {
        throw ConfigError("seeds[" + std::to_string(i) + "]", "expected a non-negative integer");
      }
      c.seeds.push_back(s[i].get<std::uint64_t>());
    }
  }
  read(doc, "", "threads", c.threads);
  if (doc.contains("sample")) {
    const json& s = doc.at("sample");
    check_keys(s, "sample", {"n", "qq_points"});
    read(s, "sample", "n", c.sample_n);
    read(s, "sample", "qq_points", c.qq_points);
  }
  if (doc.contains("hill")) {
    const json& h = doc.at("hill");
    check_keys(h, "hill", {"k", "k_max"});
    read(h, "hill", "k", c.hill_k);
    read(h, "hill", "k_max", c.hill_k_max);
  }
  if (doc.contains("tailcheck")) {
    const json& t = doc.at("tailcheck");
    check_keys(t, "tailcheck", {"probes", "tolerance"});
    read(t, "tailcheck", "probes", c.tail_probes);
    read(t, "tailcheck", "tolerance", c.tail_tolerance);
  }
  if (doc.contains("eval")) {
    const json& e = doc.at("eval");
    check_keys(e, "eval", {"density_points"});
    read(e, "eval", "density_points", c.density_points);
  }
  validate(c);
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("malformed document: ") + e.what());
  }
  return parse_config(doc);
}

void validate(const RunConfig& c) {
  const auto wrap = [](const std::string& field, auto&& check) {
    try {
      check();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(field, e.what());
    }
  };
  if (c.models.empty()) throw ConfigError("models", "at least one model is required");
  std::set<std::string> names;
  for (std::size_t i = 0; i < c.models.size(); ++i) {
    const std::string& n = c.models[i].name;
    if (!names.insert(n).second) throw ConfigError("models[" + std::to_string(i) + "].name", "duplicate name '" + n + "'");
    if (n.find_first_of("/\\ ") != std::string::npos || n == "historical_simulation" || n == "expected") {
      throw ConfigError("models[" + std::to_string(i) + "].name", "invalid or reserved name '" + n + "'");
    }
  }
  if (c.flow.layers < 1) throw ConfigError("flow.layers", "must be >= 1");
  if (c.flow.bins < 2) throw ConfigError("flow.bins", "must be >= 2");
  if (!(c.flow.bound > 0.0)) throw ConfigError("flow.bound", "must be > 0");
  if (!(c.init_scale >= 0.0)) throw ConfigError("flow.init_scale", "must be >= 0");
  wrap("train", [&] { c.train.validate(); });
  wrap("split.fractions", [&] { c.split.validate(); });
  if (c.split.fractions.size() != 2 && c.split.fractions.size() != 3) {
    throw ConfigError("split.fractions", "expected train/test or train/validation/test fractions");
  }
  if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0)) {
    throw ConfigError("split.validation_fraction", "must lie in (0, 1)");
  }
  wrap("backtest", [&] { c.backtest.validate(); });
  if (c.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  if (c.threads < 1) throw ConfigError("threads", "must be >= 1");
  if (c.qq_points < 1) throw ConfigError("sample.qq_points", "must be >= 1");
  if (!(c.tail_tolerance > 0.0)) throw ConfigError("tailcheck.tolerance", "must be > 0");
  for (std::size_t i = 0; i < c.tail_probes.size(); ++i) {
    if (!(std::abs(c.tail_probes[i]) > c.flow.bound)) {
      throw ConfigError("tailcheck.probes[" + std::to_string(i) + "]", "probe must lie beyond the spline bound");
    }
  }
  if (c.density_points < 2) throw ConfigError("eval.density_points", "must be >= 2");
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["input"] = {{"path", c.input.string()}, {"format", c.format == SeriesFormat::prices ? "prices" : "returns"}};
  j["output_dir"] = c.output_dir.string();
  ordered_json models = ordered_json::array();
  for (const auto& m : c.models) {
    ordered_json params = ordered_json::object();
    for (const auto& [k, v] : param_fields(m.base)) params[k] = v;
    models.push_back({{"name", m.name}, {"family", family_name(family_of(m.base))}, {"params", params}, {"flow", m.flow}});
  }
  j["models"] = std::move(models);
  j["flow"] = {{"layers", c.flow.layers}, {"bins", c.flow.bins}, {"bound", c.flow.bound}, {"init_scale", c.init_scale}};
  j["train"] = {{"learning_rate", c.train.learning_rate}, {"batch_size", c.train.batch_size},
                {"max_epochs", c.train.max_epochs},       {"patience", c.train.patience},
                {"beta1", c.train.beta1},                 {"beta2", c.train.beta2},
                {"epsilon", c.train.epsilon}};
  j["split"] = {{"fractions", c.split.fractions}, {"validation_fraction", c.validation_fraction}};
  j["backtest"] = {{"window", c.backtest.window},
                   {"confidences", c.backtest.confidences},
                   {"refit_every", c.backtest.refit_every},
                   {"validation_fraction", c.backtest.validation_fraction},
                   {"es_confidence", c.backtest.es_confidence},
                   {"historical_simulation", c.historical_simulation}};
  j["seeds"] = c.seeds;
  j["threads"] = c.threads;
  j["sample"] = {{"n", c.sample_n}, {"qq_points", c.qq_points}};
  j["hill"] = {{"k", c.hill_k}, {"k_max", c.hill_k_max}};
  j["tailcheck"] = {{"probes", c.tail_probes}, {"tolerance", c.tail_tolerance}};
  j["eval"] = {{"density_points", c.density_points}};
  return j;
}

Period parse_period(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("--period", "expected FROM:TO with ISO dates");
  try {
    Period p{parse_date(text.substr(0, colon)), parse_date(text.substr(colon + 1))};
    if (p.to < p.from) throw ConfigError("--period", "end date precedes start date");
    return p;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("--period", e.what());
  }
}

// --- commands ---------------------------------------------------------------

int cmd_fit(const RunConfig& cfg, std::ostream& log) {
  const Prepared p = prepare(cfg);
  const auto train = p.standardizer.apply(p.segment(0));
  const auto val = p.standardizer.apply(p.segment(1));

  struct Job {
    std::size_t model;
    std::uint64_t seed;
    TrainHistory history;
    double nll[3] = {0, 0, 0};
  };
  std::vector<Job> jobs;
  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    for (std::uint64_t s : cfg.seeds) jobs.push_back({m, s, {}, {}});
  }
  fs::create_directories(cfg.output_dir / "models");
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
    Job& job = jobs[i];
    const ModelEntry& entry = cfg.models[job.model];
    FlowModel model = initial_model(entry, cfg, job.seed);
    if (model.num_parameters() > 0) {
      TrainConfig tc = cfg.train;
      tc.seed = job.seed;
      FitResult res = fit(std::move(model), train, val, tc);
      model = std::move(res.model);
      job.history = std::move(res.history);
    }
    for (std::size_t s = 0; s < 3; ++s) job.nll[s] = corrected_nll(model, p.standardizer, p.segment(s));
    save_model(model_path(cfg, entry.name, job.seed), model, p.standardizer);
    if (model.num_parameters() > 0) {
      std::ostringstream h;
      job.history.write_csv(h);
      write_text(cfg.output_dir / "history" / (entry.name + "_seed" + std::to_string(job.seed) + ".csv"), h.str());
    }
  });

  std::ostringstream runs;
  runs << "model,family,flow,seed,epochs,best_epoch,stop_reason,rejected_steps,train_nll,val_nll,test_nll\n";
  for (const Job& j : jobs) {
    const ModelEntry& e = cfg.models[j.model];
    const bool trained = !j.history.val_nll.empty();
    runs << e.name << ',' << family_name(family_of(e.base)) << ',' << (e.flow ? 1 : 0) << ',' << j.seed << ','
         << j.history.val_nll.size() << ',' << (trained ? std::to_string(j.history.best_epoch) : "") << ','
         << (trained ? stop_reason_name(j.history.stop_reason) : "") << ',' << j.history.rejected_steps << ','
         << num(j.nll[0]) << ',' << num(j.nll[1]) << ',' << num(j.nll[2]) << '\n';
  }

  std::optional<double> gaussian_test;
  std::ostringstream summary;
  ordered_json rows = ordered_json::array();
  summary << "model,family,flow,seeds,train_nll_mean,train_nll_se,test_nll_mean,test_nll_se,delta_vs_gaussian_flow\n";
  std::vector<std::vector<double>> train_nll(cfg.models.size()), test_nll(cfg.models.size());
  for (const Job& j : jobs) {
    train_nll[j.model].push_back(j.nll[0]);
    test_nll[j.model].push_back(j.nll[2]);
  }
  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    if (cfg.models[m].name == "gaussian_flow") gaussian_test = mean_of(test_nll[m]);
  }
  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    const ModelEntry& e = cfg.models[m];
    const double test_mean = mean_of(test_nll[m]);
    std::string delta;
    if (gaussian_test && e.flow) delta = num((test_mean - *gaussian_test) / std::abs(*gaussian_test));
    summary << e.name << ',' << family_name(family_of(e.base)) << ',' << (e.flow ? 1 : 0) << ','
            << cfg.seeds.size() << ',' << num(mean_of(train_nll[m])) << ',' << se_field(train_nll[m]) << ','
            << num(test_mean) << ',' << se_field(test_nll[m]) << ',' << delta << '\n';
    log << "fit " << e.name << ": test NLL " << num(test_mean) << " over " << cfg.seeds.size() << " seed(s)\n";
  }
  ordered_json doc;
  doc["split"] = split_json(p);
  doc["nll_units"] = "raw returns, -log p(x_std) + ln scale";
  write_text(cfg.output_dir / "fit_runs.csv", runs.str());
  write_text(cfg.output_dir / "fit_summary.csv", summary.str());
  write_text(cfg.output_dir / "fit_split.json", doc.dump(2) + "\n");
  return 0;
}

int cmd_eval(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const Prepared p = prepare(cfg);
  const auto models = fitted_models(cfg, opts, false);
  const char* names[] = {"train", "validation", "test"};
  std::ostringstream table;
  table << "model,family,seed,segment,n,standardized_nll,log_scale_correction,nll\n";
  for (const auto& m : models) {
    // Every row uses the split's training standardizer, whatever a model file carries.
    for (std::size_t s = 0; s < 3; ++s) {
      const double nll = corrected_nll(m.doc.model, p.standardizer, p.segment(s));
      const double corr = p.standardizer.log_jacobian();
      table << m.name << ',' << family_name(m.doc.model.family()) << ',' << m.seed << ',' << names[s] << ','
            << p.segments[s].size() << ',' << num(nll - corr) << ',' << num(corr) << ',' << num(nll) << '\n';
    }
    if (m.doc.standardizer && (m.doc.standardizer->mean() != p.standardizer.mean() ||
                               m.doc.standardizer->scale() != p.standardizer.scale())) {
      log << "warning: " << m.name << " was fit with a different standardizer than this split\n";
    }
  }

  // Density curves on a common raw-return grid, first seed of each model.
  std::ostringstream dens;
  dens << "x";
  std::vector<const LoadedModel*> firsts;
  std::set<std::string> seen;
  for (const auto& m : models) {
    if (seen.insert(m.name).second) {
      firsts.push_back(&m);
      dens << ',' << m.name;
    }
  }
  dens << '\n';
  const double lim = 2.0 * cfg.flow.bound;
  for (std::size_t i = 0; i < cfg.density_points; ++i) {
    const double z = -lim + 2.0 * lim * i / (cfg.density_points - 1);
    dens << num(p.standardizer.invert(z));
    for (const auto* m : firsts) dens << ',' << num(m->doc.model.log_prob(z) - p.standardizer.log_jacobian());
    dens << '\n';
  }
  write_text(cfg.output_dir / "eval_nll.csv", table.str());
  write_text(cfg.output_dir / "density_log.csv", dens.str());
  log << "eval: " << models.size() << " model file(s) on " << p.series.size() << " returns\n";
  return 0;
}

int cmd_sample(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  if (cfg.sample_n == 0) throw ConfigError("sample.n", "must be >= 1");
  const Prepared p = prepare(cfg);
  std::vector<double> empirical(p.segment(2).begin(), p.segment(2).end());
  std::sort(empirical.begin(), empirical.end());
  for (const auto& m : fitted_models(cfg, opts, true)) {
    Rng rng = Rng(m.seed).split(0x5a3b1e);
    std::vector<double> xs = flow_sample(m.doc.model, cfg.sample_n, rng);
    for (double& x : xs) x = p.standardizer.invert(x);
    std::ostringstream out;
    out << "sample\n";
    for (double x : xs) out << num(x) << '\n';
    std::sort(xs.begin(), xs.end());
    std::ostringstream qq;
    qq << "probability,model_quantile,empirical_quantile\n";
    for (std::size_t i = 1; i <= cfg.qq_points; ++i) {
      const double prob = static_cast<double>(i) / (cfg.qq_points + 1);
      qq << num(prob) << ',' << num(type7_quantile(xs, prob)) << ',' << num(type7_quantile(empirical, prob)) << '\n';
    }
    write_text(cfg.output_dir / "samples" / (m.name + ".csv"), out.str());
    write_text(cfg.output_dir / "samples" / (m.name + "_qq.csv"), qq.str());
    log << "sample " << m.name << ": " << cfg.sample_n << " draws\n";
  }
  return 0;
}

int cmd_backtest(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  if (cfg.input.empty()) throw ConfigError("input.path", "required (set it in the config or pass --input)");
  const ReturnSeries series = load_series(cfg.input, cfg.format);
  BacktestConfig bc = cfg.backtest;
  bc.seed = cfg.seeds.front();
  bc.threads = cfg.threads;

  std::vector<ModelSpec> specs;
  if (cfg.historical_simulation) {
    ModelSpec hs;
    hs.name = "historical_simulation";
    hs.historical_simulation = true;
    specs.push_back(hs);
  }
  for (const auto& m : cfg.models) {
    ModelSpec s;
    s.name = m.name;
    s.base = m.base;
    s.shape = m.flow ? cfg.flow : FlowShape{0, cfg.flow.bins, cfg.flow.bound};
    s.init_scale = cfg.init_scale;
    s.train = cfg.train;
    specs.push_back(s);
  }

  std::ostringstream summary;
  summary << "model,confidence,n,violations,rate,expected_rate,kupiec_lr,kupiec_p,christoffersen_lr,"
             "christoffersen_p,christoffersen_degenerate,basel_zone\n";
  std::ostringstream es_table;
  es_table << "model,confidence,model_es,empirical_es,underestimation\n";
  std::ostringstream period_table;
  period_table << "model,confidence,days,violations,worst_date,worst_realized,var_on_worst_day,min_var\n";
  bool expected_written = false;

  for (const auto& spec : specs) {
    BacktestReport r = run_backtest(spec, series, bc);
    if (opts.period) r.period = summarize_period(r, opts.period->from, opts.period->to);
    if (!expected_written) {
      for (const auto& row : r.rows) {
        summary << "expected," << num(row.confidence) << ',' << row.n << ',' << row.expected << ','
                << num(static_cast<double>(row.expected) / row.n) << ',' << num(1.0 - row.confidence)
                << ",,,,,,\n";
      }
      expected_written = true;
    }
    for (const auto& row : r.rows) {
      summary << r.model << ',' << num(row.confidence) << ',' << row.n << ',' << row.violations << ','
              << num(row.rate) << ',' << num(1.0 - row.confidence) << ',' << num(row.kupiec.statistic) << ','
              << num(row.kupiec.p_value) << ',' << num(row.christoffersen.statistic) << ','
              << num(row.christoffersen.p_value) << ',' << (row.christoffersen.degenerate ? 1 : 0) << ','
              << (row.basel ? zone_name(*row.basel) : "") << '\n';
    }
    if (r.es) {
      es_table << r.model << ',' << num(r.es->confidence) << ',' << num(r.es->model_es) << ','
               << num(r.es->empirical_es) << ',' << num(r.es->underestimation) << '\n';
    }
    if (r.period) {
      for (const auto& row : r.period->rows) {
        period_table << r.model << ',' << num(row.confidence) << ',' << row.days << ',' << row.violations << ','
                     << format_date(row.worst_date) << ',' << num(row.worst_realized) << ','
                     << num(row.var_on_worst_day) << ',' << num(row.min_var) << '\n';
      }
    }
    std::ostringstream js, csv;
    r.write_json(js);
    r.write_csv(csv);
    write_text(cfg.output_dir / "backtest" / (r.model + ".json"), js.str());
    write_text(cfg.output_dir / "backtest" / (r.model + "_forecasts.csv"), csv.str());
    log << "backtest " << r.model << ": " << r.days.size() << " forecast days, " << r.refits << " fit(s)\n";
  }
  write_text(cfg.output_dir / "backtest_summary.csv", summary.str());
  write_text(cfg.output_dir / "es_summary.csv", es_table.str());
  if (opts.period) write_text(cfg.output_dir / "period_summary.csv", period_table.str());
  return 0;
}

int cmd_tailcheck(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  std::vector<LoadedModel> models;
  bool have_fits = !opts.model_files.empty();
  if (!have_fits) {
    have_fits = std::all_of(cfg.models.begin(), cfg.models.end(),
                            [&](const ModelEntry& m) { return fs::exists(model_path(cfg, m.name, cfg.seeds.front())); });
  }
  if (have_fits) {
    models = fitted_models(cfg, opts, false);
  } else {
    // Without fitted documents, check freshly drawn random flows.
    for (const auto& m : cfg.models) {
      for (std::uint64_t seed : cfg.seeds) {
        Rng rng(seed);
        FlowShape shape = m.flow ? cfg.flow : FlowShape{0, cfg.flow.bins, cfg.flow.bound};
        models.push_back({m.name, seed, {FlowModel::random(m.base, shape, 0.5, rng), std::nullopt}});
      }
    }
  }
  std::vector<double> probes = cfg.tail_probes;
  const double b = cfg.flow.bound;
  if (probes.empty()) probes = {-(10 * b), -(2 * b), -(b + 0.01), b + 0.01, 2 * b, 10 * b};

  std::ostringstream report;
  bool all = true;
  for (const auto& m : models) {
    for (double x : probes) {
      if (!(std::abs(x) > m.doc.model.bound())) {
        throw ConfigError("tailcheck.probes", "probe " + num(x) + " lies inside the bound of " + m.name);
      }
    }
    const TailReport t = tail_identity_check(m.doc.model, probes, cfg.tail_tolerance);
    for (const auto& pr : t.probes) {
      report << (pr.equal ? "PASS" : "FAIL") << " identity model=" << m.name << " seed=" << m.seed
             << " x=" << num(pr.x) << " flow_log_prob=" << num(pr.flow_log_prob)
             << " base_log_prob=" << num(pr.base_log_prob)
             << " abs_diff=" << num(std::abs(pr.flow_log_prob - pr.base_log_prob)) << '\n';
    }
    for (std::size_t i = 0; i < t.slopes.size(); ++i) {
      const auto& s = t.slopes[i];
      report << (s.pass ? "PASS" : "FAIL") << " slope model=" << m.name << " seed=" << m.seed
             << " tail=" << (i == 0 ? "right" : "left") << " range=[" << num(s.lo) << "," << num(s.hi)
             << "] slope=" << num(s.slope) << " expected=" << num(s.expected) << '\n';
    }
    all = all && t.passed();
  }
  // Log-tail curves for the first seed of each model.
  std::ostringstream curves;
  curves << "model,side,abs_x,flow_log_prob,base_log_prob\n";
  std::set<std::string> seen;
  for (const auto& m : models) {
    if (!seen.insert(m.name).second) continue;
    for (int side : {-1, 1}) {
      for (int i = 0; i <= 200; ++i) {
        const double ax = 0.1 * b * std::pow(100.0, i / 200.0);
        const double x = side * ax;
        curves << m.name << ',' << (side < 0 ? "left" : "right") << ',' << num(ax) << ','
               << num(m.doc.model.log_prob(x)) << ',' << num(base_log_pdf(m.doc.model.base(), x)) << '\n';
      }
    }
  }
  write_text(cfg.output_dir / "tailcheck.txt", report.str());
  write_text(cfg.output_dir / "tail_curves.csv", curves.str());
  log << report.str();
  log << "tailcheck: " << (all ? "PASS" : "FAIL") << '\n';
  return all ? 0 : 2;
}

int cmd_hill(const RunConfig& cfg, std::ostream& log) {
  if (cfg.input.empty()) throw ConfigError("input.path", "required (set it in the config or pass --input)");
  const ReturnSeries series = load_series(cfg.input, cfg.format);
  const std::vector<double> losses = loss_magnitudes(series.returns);
  if (losses.size() < 3) throw DataError("hill: fewer than 3 negative returns");
  const std::size_t k = cfg.hill_k ? cfg.hill_k : default_hill_k(losses.size());
  if (k >= losses.size()) throw ConfigError("hill.k", "must be smaller than the number of losses");
  const std::size_t k_max = cfg.hill_k_max ? cfg.hill_k_max : losses.size() - 1;
  if (k_max >= losses.size()) throw ConfigError("hill.k_max", "must be smaller than the number of losses");
  const double alpha = hill_estimator(losses, k);
  std::ostringstream curve;
  curve << "k,alpha\n";
  for (const auto& pt : hill_curve(losses, k_max)) curve << pt.k << ',' << num(pt.alpha) << '\n';
  ordered_json doc;
  doc["n_returns"] = series.size();
  doc["n_losses"] = losses.size();
  doc["k"] = k;
  doc["k_rule"] = cfg.hill_k ? "configured" : "ceil(0.05 n_losses)";
  doc["alpha"] = alpha;
  write_text(cfg.output_dir / "hill_curve.csv", curve.str());
  write_text(cfg.output_dir / "hill_summary.json", doc.dump(2) + "\n");
  log << "hill: alpha = " << num(alpha) << " at k = " << k << " of " << losses.size() << " losses\n";
  return 0;
}

// --- entry point ------------------------------------------------------------

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spline flows with Levy and heavy-tailed bases: fitting, evaluation and VaR/ES backtesting"};
  app.require_subcommand(1);
  std::string config_path, input, out_dir, family, period, format;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> model_files;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--input", input, "input series (overrides input.path)");
    sub->add_option("--format", format, "prices or returns (overrides input.format)");
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "run a single seed");
    sub->add_option("--family", family, "restrict to models of one base family");
  };
  CLI::App* fit_cmd = app.add_subcommand("fit", "train every model for every seed");
  CLI::App* eval_cmd = app.add_subcommand("eval", "NLL table and density curves for fitted models");
  CLI::App* sample_cmd = app.add_subcommand("sample", "draw samples and QQ pairs from fitted models");
  CLI::App* backtest_cmd = app.add_subcommand("backtest", "rolling VaR/ES backtest");
  CLI::App* tail_cmd = app.add_subcommand("tailcheck", "verify identity tails beyond the spline bound");
  CLI::App* hill_cmd = app.add_subcommand("hill", "Hill tail-index curve of the loss tail");
  for (CLI::App* sub : {fit_cmd, eval_cmd, sample_cmd, backtest_cmd, tail_cmd, hill_cmd}) add_common(sub);
  backtest_cmd->add_option("--period", period, "illustrative window FROM:TO (ISO dates)");
  for (CLI::App* sub : {eval_cmd, sample_cmd, tail_cmd}) {
    sub->add_option("--model", model_files, "model document to use instead of the fitted set (repeatable)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    RunConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
    if (!input.empty()) cfg.input = input;
    if (!format.empty()) {
      try {
        cfg.format = parse_series_format(format);
      } catch (const std::exception& e) {
        throw ConfigError("--format", e.what());
      }
    }
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed) cfg.seeds = {*seed};
    if (!family.empty()) {
      Family f{};
      try {
        f = parse_family(family);
      } catch (const std::exception&) {
        throw ConfigError("--family", "unknown family '" + family + "'");
      }
      std::erase_if(cfg.models, [&](const ModelEntry& m) { return family_of(m.base) != f; });
      if (cfg.models.empty()) throw ConfigError("--family", "no configured model has family '" + family + "'");
    }
    CommandOptions opts;
    if (!period.empty()) opts.period = parse_period(period);
    for (const auto& f : model_files) opts.model_files.emplace_back(f);
    validate(cfg);

    fs::create_directories(cfg.output_dir);
    write_text(cfg.output_dir / "config.effective.json", to_json(cfg).dump(2) + "\n");

    if (fit_cmd->parsed()) return cmd_fit(cfg, out);
    if (eval_cmd->parsed()) return cmd_eval(cfg, opts, out);
    if (sample_cmd->parsed()) return cmd_sample(cfg, opts, out);
    if (backtest_cmd->parsed()) return cmd_backtest(cfg, opts, out);
    if (tail_cmd->parsed()) return cmd_tailcheck(cfg, opts, out);
    if (hill_cmd->parsed()) return cmd_hill(cfg, out);
    return 1;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace levyflow::cli
