#include <chrono>
#include <cmath>
#include <numbers>

#include "cprnn/errors.hpp"
#include "cprnn/random.hpp"
#include "cprnn/training.hpp"

namespace cprnn {

TrainResult train(const LmModel& init, std::span<const Token> train_stream, std::span<const Token> valid_stream,
                  const TrainConfig& cfg, const EpochCallback& on_epoch, Exec exec) {
  cfg.validate();
  init.validate();
  const Index T = cfg.seq_len;
  const Index N = static_cast<Index>(train_stream.size());
  if (N < T + 1)
    throw DataError("training split has " + std::to_string(N) + " tokens, need at least " + std::to_string(T + 1) +
                    " for seq_len " + std::to_string(T));
  if (valid_stream.size() < 2) throw DataError("validation split needs at least two tokens");

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  LmModel model = init;
  TrainState state = init_train_state(model, cfg);
  TrainResult result;
  result.best = model;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    auto rng = make_rng(cfg.seed, {0x65706f6368, static_cast<std::uint64_t>(epoch)});
    const Index max_offset = std::min<Index>(T - 1, N - 1 - T);
    const Index offset = static_cast<Index>(std::uniform_int_distribution<long>(0, max_offset)(rng));
    const Index usable = N - offset;
    const Index streams = std::min<Index>(cfg.batch_size, (usable - 1) / T);
    const Index per_stream = (usable - 1) / streams;
    const Index windows = per_stream / T;
    const double lr_used = state.lr;

    TokenMatrix batch(streams, T + 1);
    Matrix carried;
    double train_nll = 0.0;
    for (Index w = 0; w < windows; ++w) {
      for (Index s = 0; s < streams; ++s)
        for (Index t = 0; t <= T; ++t) batch(s, t) = train_stream[offset + s * per_stream + w * T + t];
      BatchGradients bg = batch_gradients(model, batch, w == 0 ? nullptr : &carried, exec);
      if (!std::isfinite(bg.nll)) throw NumericalError("training loss became non-finite in epoch " + std::to_string(epoch));
      clip_global_norm(bg.grads, cfg.grad_clip_norm);
      adam_step(state, bg.grads, model, cfg);
      carried = std::move(bg.final_states);
      train_nll += bg.nll;
    }
    train_nll /= static_cast<double>(windows);

    const EvalResult valid = evaluate(model, valid_stream, cfg.batch_size, exec);
    scheduler_step(state, valid.nll, cfg);
    if (valid.nll < result.best_valid_nll) {
      result.best_valid_nll = valid.nll;
      result.best = model;
    }
    const double now = elapsed();
    for (const EpochMetrics& e : {EpochMetrics{epoch, "train", train_nll, train_nll / std::numbers::ln2, lr_used, now},
                                  EpochMetrics{epoch, "valid", valid.nll, valid.bpc, lr_used, now}}) {
      result.history.push_back(e);
      if (on_epoch) on_epoch(e);
    }
    result.epochs_run = epoch;
    if (should_stop(state, cfg)) break;
  }
  return result;
}

}  // namespace cprnn
