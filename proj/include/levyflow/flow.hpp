#pragma once

#include <span>
#include <string>
#include <vector>

#include "levyflow/basedist.hpp"
#include "levyflow/rng.hpp"
#include "levyflow/spline.hpp"

namespace levyflow {

struct FlowShape {
  int layers = 4;
  int bins = 8;
  double bound = 5.0;
};

/// A univariate flow X = f_{L-1}(...f_0(Z)) with Z drawn from a fixed base
/// law.  The constrained knot grids are cached and rebuilt whenever the raw
/// parameters change, so evaluation never repeats the constraint mapping.
class FlowModel {
 public:
  FlowModel(BaseParams base, std::vector<SplineLayer> layers);

  static FlowModel identity(BaseParams base, const FlowShape& shape = {});
  /// Raw parameters drawn i.i.d. N(0, scale^2).
  static FlowModel random(BaseParams base, const FlowShape& shape, double scale, Rng& rng);

  const BaseParams& base() const noexcept { return base_; }
  Family family() const { return family_of(base_); }
  const std::vector<SplineLayer>& layers() const noexcept { return layers_; }
  const std::vector<KnotGrid>& grids() const noexcept { return grids_; }
  int num_layers() const noexcept { return static_cast<int>(layers_.size()); }
  int bins() const noexcept { return layers_.empty() ? 0 : layers_.front().bins(); }
  double bound() const noexcept { return bound_; }
  FlowShape shape() const { return {num_layers(), bins(), bound_}; }

  /// Flattened raw parameters, layer by layer as [widths, heights, derivs].
  std::size_t num_parameters() const noexcept;
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> params);

  /// z -> x through every layer in order.
  double forward(double z) const;
  /// x -> z through every layer in reverse; accumulates ln |d f^{-1}/dx|.
  double inverse(double x, double& logdet) const;
  double log_prob(double x) const;

 private:
  void rebuild();

  BaseParams base_;
  std::vector<SplineLayer> layers_;
  std::vector<KnotGrid> grids_;
  double bound_ = 5.0;
};

double flow_log_prob(const FlowModel& model, double x_std);
std::vector<double> flow_sample(const FlowModel& model, std::size_t n, Rng& rng);

struct TailProbe {
  double x = 0.0;
  double flow_log_prob = 0.0;
  double base_log_prob = 0.0;
  bool equal = false;
};

struct TailSlopeFit {
  double lo = 0.0;
  double hi = 0.0;
  double slope = 0.0;     // least-squares d ln p / d ln |x|
  double expected = 0.0;  // -(nu_df + 1)
  bool pass = false;
};

struct TailReport {
  std::vector<TailProbe> probes;
  std::vector<TailSlopeFit> slopes;  // right then left tail; Student-t base only
  double tolerance = 1e-14;

  bool passed() const;
  std::vector<TailProbe> violations() const;
};

/// Checks that the model density coincides with the base density at every
/// probe beyond the spline bound.  Probes inside [-bound, bound] are a
/// precondition violation and throw std::invalid_argument.
TailReport tail_identity_check(const FlowModel& model, std::span<const double> probes, double tolerance = 1e-14);

/// Least-squares slope of ln p(x) against ln |x| on log-spaced points in [lo, hi]
/// (mirrored to [-hi, -lo] when `left` is set).
double log_log_tail_slope(const FlowModel& model, double lo, double hi, bool left, int points = 64);

}  // namespace levyflow
