#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "levyflow/flow.hpp"

namespace levyflow {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 500;
  std::size_t patience = 50;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update at learning rate `lr`.
/// Throws std::invalid_argument if the shapes of params, grads and state differ.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& cfg,
               double lr);
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                      const TrainConfig& cfg) {
  adam_step(params, grads, state, cfg, cfg.learning_rate);
}

/// Mean negative log-likelihood of standardized points.
double batch_nll(const FlowModel& model, std::span<const double> batch);

struct NllGradient {
  double nll = 0.0;
  std::vector<double> grad;  // same layout as FlowModel::parameters()
};

/// Exact gradient of batch_nll with respect to every raw spline parameter,
/// by one reverse sweep over a tape that covers the constraint mapping,
/// the inverse splines, their log-determinants and the base log-density.
/// Base parameters stay fixed.
NllGradient grad_batch_nll(const FlowModel& model, std::span<const double> batch);

enum class StopReason { patience, max_epochs };
std::string_view stop_reason_name(StopReason r);

struct TrainHistory {
  std::vector<double> train_nll;  // full pass after each epoch
  std::vector<double> val_nll;
  std::size_t best_epoch = 0;
  StopReason stop_reason = StopReason::max_epochs;
  std::size_t rejected_steps = 0;  // steps retried at half rate because the NLL went non-finite

  double best_val_nll() const { return val_nll.at(best_epoch); }
  /// Delimited table with header `epoch,train_nll,val_nll`.
  void write_csv(std::ostream& os) const;
};

struct FitResult {
  FlowModel model;
  TrainHistory history;
};

/// Mini-batch maximum likelihood with early stopping on validation NLL.
/// Returns the parameters from the best validation epoch.
FitResult fit(FlowModel model, std::span<const double> train, std::span<const double> val, const TrainConfig& cfg);

}  // namespace levyflow
