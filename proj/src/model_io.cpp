#include "levyflow/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace levyflow {

namespace {

constexpr const char* kMagic = "levyflow-model";
constexpr int kVersion = 1;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void bad(std::size_t line, const std::string& what) {
  throw ParseError("model document line " + std::to_string(line) + ": " + what, line);
}

double read_num(std::istringstream& in, std::size_t line) {
  std::string tok;
  if (!(in >> tok)) bad(line, "missing number");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) bad(line, "bad number '" + tok + "'");
  return v;
}

}  // namespace

std::vector<std::pair<std::string, double>> param_fields(const BaseParams& p) {
  struct Visitor {
    std::vector<std::pair<std::string, double>> operator()(const GaussianParams& q) const {
      return {{"mu", q.mu}, {"sigma", q.sigma}};
    }
    std::vector<std::pair<std::string, double>> operator()(const StudentTParams& q) const {
      return {{"nu_df", q.nu_df}, {"mu", q.mu}, {"sigma", q.sigma}};
    }
    std::vector<std::pair<std::string, double>> operator()(const VgParams& q) const {
      return {{"mu", q.mu}, {"sigma", q.sigma}, {"theta", q.theta}, {"nu", q.nu}};
    }
    std::vector<std::pair<std::string, double>> operator()(const NigParams& q) const {
      return {{"alpha", q.alpha}, {"beta", q.beta}, {"mu", q.mu}, {"delta", q.delta}};
    }
  };
  return std::visit(Visitor{}, p);
}

BaseParams params_from_fields(Family f, const std::map<std::string, double>& fields) {
  BaseParams p = default_params(f);
  for (const auto& [name, value] : fields) {
    double* slot = nullptr;
    std::visit(
        [&](auto& q) {
          using Q = std::decay_t<decltype(q)>;
          if (name == "mu") slot = &q.mu;
          if constexpr (std::is_same_v<Q, GaussianParams>) {
            if (name == "sigma") slot = &q.sigma;
          } else if constexpr (std::is_same_v<Q, StudentTParams>) {
            if (name == "nu_df") slot = &q.nu_df;
            if (name == "sigma") slot = &q.sigma;
          } else if constexpr (std::is_same_v<Q, VgParams>) {
            if (name == "sigma") slot = &q.sigma;
            if (name == "theta") slot = &q.theta;
            if (name == "nu") slot = &q.nu;
          } else {
            if (name == "alpha") slot = &q.alpha;
            if (name == "beta") slot = &q.beta;
            if (name == "delta") slot = &q.delta;
          }
        },
        p);
    if (!slot) {
      throw InvalidParameter("unknown parameter '" + name + "' for family " + std::string(family_name(f)));
    }
    *slot = value;
  }
  validate(p);
  return p;
}

void write_model(std::ostream& os, const FlowModel& model, const std::optional<Standardizer>& s) {
  os << kMagic << ' ' << kVersion << '\n';
  os << "family " << family_name(model.family()) << '\n';
  os << "base";
  for (const auto& [name, value] : param_fields(model.base())) os << ' ' << name << ' ' << num(value);
  os << '\n';
  os << "shape " << model.num_layers() << ' ' << model.bins() << ' ' << num(model.bound()) << '\n';
  for (int l = 0; l < model.num_layers(); ++l) {
    const SplineLayer& layer = model.layers()[l];
    const std::pair<const char*, const std::vector<double>*> parts[] = {
        {"widths", &layer.raw_widths}, {"heights", &layer.raw_heights}, {"derivs", &layer.raw_derivs}};
    for (const auto& [label, values] : parts) {
      os << "layer " << l << ' ' << label;
      for (double v : *values) os << ' ' << num(v);
      os << '\n';
    }
  }
  if (s) os << "standardizer " << num(s->mean()) << ' ' << num(s->scale()) << ' ' << s->fit_count() << '\n';
  os << "end\n";
}

ModelDocument read_model(std::istream& is) {
  std::string text;
  std::size_t line_no = 0;
  std::optional<Family> family;
  std::map<std::string, double> fields;
  int layers = -1;
  int bins = 0;
  double bound = 0.0;
  std::vector<SplineLayer> parsed;
  std::optional<Standardizer> standardizer;
  bool header = false;
  bool ended = false;

  while (std::getline(is, text)) {
    ++line_no;
    if (text.empty()) continue;
    std::istringstream in(text);
    std::string key;
    in >> key;
    if (!header) {
      int version = 0;
      if (key != kMagic || !(in >> version)) bad(line_no, "not a model document");
      if (version != kVersion) bad(line_no, "unsupported version " + std::to_string(version));
      header = true;
    } else if (key == "family") {
      std::string name;
      in >> name;
      try {
        family = parse_family(name);
      } catch (const std::exception& e) {
        bad(line_no, e.what());
      }
    } else if (key == "base") {
      std::string name;
      while (in >> name) fields[name] = read_num(in, line_no);
    } else if (key == "shape") {
      if (!(in >> layers >> bins) || layers < 0 || (layers > 0 && bins < 2)) bad(line_no, "bad shape");
      bound = read_num(in, line_no);
      parsed.assign(layers, SplineLayer{});
      for (auto& l : parsed) l.bound = bound;
    } else if (key == "layer") {
      int index = -1;
      std::string part;
      if (!(in >> index >> part) || index < 0 || index >= layers) bad(line_no, "bad layer index");
      std::vector<double> values;
      while (in >> std::ws && !in.eof()) values.push_back(read_num(in, line_no));
      SplineLayer& l = parsed[index];
      if (part == "widths") {
        l.raw_widths = std::move(values);
      } else if (part == "heights") {
        l.raw_heights = std::move(values);
      } else if (part == "derivs") {
        l.raw_derivs = std::move(values);
      } else {
        bad(line_no, "unknown layer part '" + part + "'");
      }
    } else if (key == "standardizer") {
      const double mean = read_num(in, line_no);
      const double scale = read_num(in, line_no);
      std::size_t count = 0;
      in >> count;
      standardizer.emplace(mean, scale, count);
    } else if (key == "end") {
      ended = true;
      break;
    } else {
      bad(line_no, "unknown record '" + key + "'");
    }
  }
  if (!header) throw ParseError("model document: empty input", 0);
  if (!ended) bad(line_no, "missing 'end' record");
  if (!family) bad(line_no, "missing 'family' record");
  if (layers < 0) bad(line_no, "missing 'shape' record");

  try {
    BaseParams base = params_from_fields(*family, fields);
    for (const auto& l : parsed) {
      if (l.bins() != bins) throw std::invalid_argument("layer does not match the declared bin count");
    }
    FlowModel model = layers == 0 ? FlowModel::identity(std::move(base), {0, bins, bound})
                                  : FlowModel(std::move(base), std::move(parsed));
    return {std::move(model), standardizer};
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    bad(line_no, e.what());
  }
}

void save_model(const std::filesystem::path& path, const FlowModel& model, const std::optional<Standardizer>& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_model(out, model, s);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ModelDocument load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_model(in);
}

}  // namespace levyflow
