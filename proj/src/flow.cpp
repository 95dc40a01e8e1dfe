#include "levyflow/flow.hpp"

#include <cmath>
#include <stdexcept>

namespace levyflow {

SplineLayer SplineLayer::identity(int bins, double bound) {
  SplineLayer l;
  l.raw_widths.assign(bins, 0.0);
  l.raw_heights.assign(bins, 0.0);
  l.raw_derivs.assign(bins > 0 ? bins - 1 : 0, 0.0);
  l.bound = bound;
  l.validate();
  return l;
}

void SplineLayer::validate() const {
  if (raw_widths.size() < 2) throw std::invalid_argument("spline layer: need at least 2 bins");
  if (raw_heights.size() != raw_widths.size() || raw_derivs.size() + 1 != raw_widths.size()) {
    throw std::invalid_argument("spline layer: widths/heights/derivs sizes disagree");
  }
  if (!(bound > 0.0) || !std::isfinite(bound)) throw std::invalid_argument("spline layer: bound must be > 0");
  for (const auto* v : {&raw_widths, &raw_heights, &raw_derivs}) {
    for (double r : *v) {
      if (!std::isfinite(r)) throw std::invalid_argument("spline layer: raw parameters must be finite");
    }
  }
}

KnotGrid constrain(const SplineLayer& layer) {
  return constrain<double>(layer.raw_widths, layer.raw_heights, layer.raw_derivs, layer.bound);
}

FlowModel::FlowModel(BaseParams base, std::vector<SplineLayer> layers)
    : base_(std::move(base)), layers_(std::move(layers)) {
  validate(base_);
  if (!layers_.empty()) {
    bound_ = layers_.front().bound;
    for (const auto& l : layers_) {
      l.validate();
      if (l.bound != bound_) throw std::invalid_argument("flow: all layers must share the same bound");
      if (l.bins() != layers_.front().bins()) throw std::invalid_argument("flow: all layers must share the bin count");
    }
  }
  rebuild();
}

FlowModel FlowModel::identity(BaseParams base, const FlowShape& shape) {
  if (shape.layers < 0) throw std::invalid_argument("flow: negative layer count");
  std::vector<SplineLayer> layers;
  for (int i = 0; i < shape.layers; ++i) layers.push_back(SplineLayer::identity(shape.bins, shape.bound));
  FlowModel m(std::move(base), std::move(layers));
  m.bound_ = shape.bound;
  return m;
}

FlowModel FlowModel::random(BaseParams base, const FlowShape& shape, double scale, Rng& rng) {
  FlowModel m = identity(std::move(base), shape);
  std::vector<double> p(m.num_parameters());
  for (auto& v : p) v = scale * rng.normal();
  m.set_parameters(p);
  return m;
}

std::size_t FlowModel::num_parameters() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.num_parameters();
  return n;
}

std::vector<double> FlowModel::parameters() const {
  std::vector<double> p;
  p.reserve(num_parameters());
  for (const auto& l : layers_) {
    p.insert(p.end(), l.raw_widths.begin(), l.raw_widths.end());
    p.insert(p.end(), l.raw_heights.begin(), l.raw_heights.end());
    p.insert(p.end(), l.raw_derivs.begin(), l.raw_derivs.end());
  }
  return p;
}

void FlowModel::set_parameters(std::span<const double> params) {
  if (params.size() != num_parameters()) throw std::invalid_argument("flow: parameter vector has the wrong size");
  std::size_t i = 0;
  for (auto& l : layers_) {
    for (auto* v : {&l.raw_widths, &l.raw_heights, &l.raw_derivs}) {
      for (double& r : *v) r = params[i++];
    }
  }
  rebuild();
}

void FlowModel::rebuild() {
  grids_.clear();
  grids_.reserve(layers_.size());
  for (const auto& l : layers_) grids_.push_back(constrain(l));
}

double FlowModel::forward(double z) const {
  for (const auto& g : grids_) z = rqs_forward(g, z).value;
  return z;
}

double FlowModel::inverse(double x, double& logdet) const {
  logdet = 0.0;
  for (auto it = grids_.rbegin(); it != grids_.rend(); ++it) {
    const auto r = rqs_inverse(*it, x);
    x = r.value;
    logdet += r.logdet;
  }
  return x;
}

double FlowModel::log_prob(double x) const {
  double logdet = 0.0;
  const double z = inverse(x, logdet);
  return base_log_pdf(base_, z) + logdet;
}

double flow_log_prob(const FlowModel& model, double x_std) { return model.log_prob(x_std); }

std::vector<double> flow_sample(const FlowModel& model, std::size_t n, Rng& rng) {
  std::vector<double> z = base_sample(model.base(), n, rng);
  for (double& v : z) v = model.forward(v);
  return z;
}

bool TailReport::passed() const {
  for (const auto& p : probes) {
    if (!p.equal) return false;
  }
  for (const auto& s : slopes) {
    if (!s.pass) return false;
  }
  return true;
}

std::vector<TailProbe> TailReport::violations() const {
  std::vector<TailProbe> out;
  for (const auto& p : probes) {
    if (!p.equal) out.push_back(p);
  }
  return out;
}

double log_log_tail_slope(const FlowModel& model, double lo, double hi, bool left, int points) {
  if (!(lo > 0.0 && hi > lo) || points < 2) throw std::invalid_argument("tail slope: need 0 < lo < hi");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double llo = std::log(lo);
  const double step = (std::log(hi) - llo) / (points - 1);
  for (int i = 0; i < points; ++i) {
    const double lx = llo + step * i;
    const double x = std::exp(lx);
    const double ly = model.log_prob(left ? -x : x);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = points;
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

TailReport tail_identity_check(const FlowModel& model, std::span<const double> probes, double tolerance) {
  TailReport report;
  report.tolerance = tolerance;
  for (double x : probes) {
    if (!(std::abs(x) > model.bound())) {
      throw std::invalid_argument("tail_identity_check: probe " + std::to_string(x) + " lies inside the spline bound");
    }
  }
  for (double x : probes) {
    TailProbe p;
    p.x = x;
    p.flow_log_prob = model.log_prob(x);
    p.base_log_prob = base_log_pdf(model.base(), x);
    p.equal = std::abs(p.flow_log_prob - p.base_log_prob) <= tolerance;
    report.probes.push_back(p);
  }
  if (const auto* t = std::get_if<StudentTParams>(&model.base())) {
    const double lo = 3.0 * model.bound();
    const double hi = 10.0 * model.bound();
    for (bool left : {false, true}) {
      TailSlopeFit fit;
      fit.lo = lo;
      fit.hi = hi;
      fit.expected = -(t->nu_df + 1.0);
      fit.slope = log_log_tail_slope(model, lo, hi, left);
      fit.pass = std::abs(fit.slope - fit.expected) <= 0.05;
      report.slopes.push_back(fit);
    }
  }
  return report;
}

}  // namespace levyflow
