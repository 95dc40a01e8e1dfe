#include "levyflow/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "levyflow/autodiff.hpp"
#include "levyflow/format.hpp"

namespace levyflow {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train.learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("train.max_epochs must be >= 1");
  if (patience > max_epochs) throw std::invalid_argument("train.patience must not exceed train.max_epochs");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("train: adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("train.epsilon must be > 0");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& cfg,
               double lr) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: params, grads and state must have the same length");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

double batch_nll(const FlowModel& model, std::span<const double> batch) {
  if (batch.empty()) throw std::invalid_argument("batch_nll: empty batch");
  double sum = 0.0;
  for (double x : batch) sum += model.log_prob(x);
  return -sum / static_cast<double>(batch.size());
}

NllGradient grad_batch_nll(const FlowModel& model, std::span<const double> batch) {
  if (batch.empty()) throw std::invalid_argument("grad_batch_nll: empty batch");
  using ad::Var;
  const std::vector<double> raw = model.parameters();
  const int layers = model.num_layers();
  const int k = model.bins();
  const std::size_t per_layer = model.num_parameters() / (layers > 0 ? layers : 1);

  ad::Tape tape;
  tape.reserve(raw.size() + layers * 16 * k + batch.size() * (layers * 48 + 4));
  std::vector<Var> leaves;
  leaves.reserve(raw.size());
  for (double r : raw) leaves.push_back(tape.variable(r));

  std::vector<BasicKnotGrid<Var>> grids;
  grids.reserve(layers);
  for (int l = 0; l < layers; ++l) {
    const std::span<const Var> p(leaves.data() + l * per_layer, per_layer);
    grids.push_back(constrain<Var>(p.subspan(0, k), p.subspan(k, k), p.subspan(2 * k, k - 1), model.bound()));
  }

  const BaseParams& base = model.base();
  Var total = tape.variable(0.0);
  for (double x : batch) {
    Var cur = tape.variable(x);
    for (int l = layers - 1; l >= 0; --l) {
      const auto r = rqs_inverse(grids[l], cur);
      cur = r.value;
      total = total + r.logdet;
    }
    const double z = cur.value();
    total = total + tape.unary(cur, base_log_pdf(base, z), base_log_pdf_dx(base, z));
  }
  const double n = static_cast<double>(batch.size());
  const Var nll = total * (-1.0 / n);

  const std::vector<double> adj = tape.gradient(nll);
  NllGradient out;
  out.nll = nll.value();
  out.grad.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out.grad[i] = adj[leaves[i].index()];
  return out;
}

std::string_view stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::patience: return "patience";
    case StopReason::max_epochs: return "max_epochs";
  }
  return "unknown";
}

void TrainHistory::write_csv(std::ostream& os) const {
  os << "epoch,train_nll,val_nll\n";
  for (std::size_t e = 0; e < train_nll.size(); ++e) {
    os << e << ',' << format_double(train_nll[e]) << ',' << format_double(val_nll[e]) << '\n';
  }
}

namespace {

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = Rng(seed).split(epoch);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

constexpr int kMaxHalvings = 20;

}  // namespace

FitResult fit(FlowModel model, std::span<const double> train, std::span<const double> val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty() || val.empty()) throw std::invalid_argument("fit: train and validation sets must be nonempty");

  std::vector<double> params = model.parameters();
  std::vector<double> best_params = params;
  AdamState state(params.size());
  TrainHistory hist;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<double> batch;
  batch.reserve(cfg.batch_size);

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto order = epoch_permutation(train.size(), cfg.seed, epoch);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train[order[i]]);

      const NllGradient g = grad_batch_nll(model, batch);
      double lr = cfg.learning_rate;
      for (int attempt = 0;; ++attempt) {
        std::vector<double> trial = params;
        AdamState trial_state = state;
        adam_step(trial, g.grad, trial_state, cfg, lr);
        model.set_parameters(trial);
        if (std::isfinite(batch_nll(model, batch)) || attempt == kMaxHalvings) {
          if (attempt > 0) ++hist.rejected_steps;
          params = std::move(trial);
          state = std::move(trial_state);
          break;
        }
        lr *= 0.5;
      }
    }

    model.set_parameters(params);
    hist.train_nll.push_back(batch_nll(model, train));
    const double v = batch_nll(model, val);
    hist.val_nll.push_back(v);
    if (v < best_val) {
      best_val = v;
      best_params = params;
      hist.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.patience) {
      hist.stop_reason = StopReason::patience;
      break;
    }
  }

  model.set_parameters(best_params);
  return {std::move(model), std::move(hist)};
}

}  // namespace levyflow
