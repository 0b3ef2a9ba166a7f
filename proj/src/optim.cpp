#include <cmath>

#include "cprnn/errors.hpp"
#include "cprnn/training.hpp"

namespace cprnn {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw DataError("invalid training config: " + what); };
  if (seq_len < 1) fail("seq_len must be positive");
  if (batch_size < 1) fail("batch_size must be positive");
  if (!(lr0 > 0.0)) fail("lr must be positive");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) fail("plateau_factor must lie in (0, 1)");
  if (plateau_patience < 1) fail("plateau_patience must be positive");
  if (plateau_min_delta < 0.0) fail("plateau_min_delta must be non-negative");
  if (early_stop_patience < 1) fail("early_stop_patience must be positive");
  if (max_epochs < 0) fail("max_epochs must be non-negative");
  if (grad_clip_norm < 0.0) fail("grad_clip must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    fail("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) fail("Adam epsilon must be positive");
}

TrainState init_train_state(const LmModel& m, const TrainConfig& cfg) {
  TrainState s;
  s.m = zeros_like(m);
  s.v = zeros_like(m);
  s.lr = cfg.lr0;
  return s;
}

void adam_step(TrainState& state, const Gradients& grads, LmModel& params, const TrainConfig& cfg) {
  ++state.step;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  auto p = parameter_blocks(params);
  auto m = parameter_blocks(state.m);
  auto v = parameter_blocks(state.v);
  const auto g = parameter_blocks(grads);
  if (p.size() != g.size() || m.size() != g.size()) throw DimensionError("adam_step: layout mismatch");
  for (std::size_t b = 0; b < p.size(); ++b) {
    if (p[b].values.size() != g[b].values.size()) throw DimensionError("adam_step: block size mismatch");
    for (std::size_t i = 0; i < p[b].values.size(); ++i) {
      const double gi = g[b].values[i];
      double& mi = m[b].values[i];
      double& vi = v[b].values[i];
      mi = b1 * mi + (1.0 - b1) * gi;
      vi = b2 * vi + (1.0 - b2) * gi * gi;
      double updated = p[b].values[i] - state.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.adam_eps);
      if (cfg.precision == Precision::f32) updated = static_cast<double>(static_cast<float>(updated));
      p[b].values[i] = updated;
    }
  }
}

bool scheduler_step(TrainState& state, double val_loss, const TrainConfig& cfg) {
  if (!std::isfinite(val_loss)) throw NumericalError("validation loss is not finite");
  const bool improved = val_loss < state.best_val - cfg.plateau_min_delta;
  if (improved) {
    state.best_val = val_loss;
    state.epochs_since_improvement = 0;
    state.plateau_bad_epochs = 0;
  } else {
    ++state.epochs_since_improvement;
    if (++state.plateau_bad_epochs >= cfg.plateau_patience) {
      state.lr *= cfg.plateau_factor;
      state.plateau_bad_epochs = 0;
    }
  }
  return improved;
}

bool should_stop(const TrainState& state, const TrainConfig& cfg) {
  return state.epochs_since_improvement >= cfg.early_stop_patience;
}

}  // namespace cprnn
