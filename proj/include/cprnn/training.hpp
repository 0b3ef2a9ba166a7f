#pragma once

// Character-level language model on top of a recurrent cell, trained with
// truncated BPTT and Adam. Inputs are token indices; the cell sees them as
// one-hot vectors, which the kernels exploit (U x is a column lookup, B^T x
// a row lookup, A x2 x a slice).

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cprnn/cells.hpp"
#include "cprnn/exec.hpp"

namespace cprnn {

using Token = std::int32_t;
using TokenMatrix = Eigen::Matrix<Token, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LmModel {
  CellParams cell;
  Matrix out_W;  // vocab x n
  Vector out_b;  // vocab

  ModelKind kind() const { return kind_of(cell); }
  Index hidden() const { return hidden_size(cell); }
  Index vocab() const { return out_W.rows(); }
  void validate() const;
};

/// Gradients and Adam moments share the model's layout.
using Gradients = LmModel;

struct ParamBlock {
  std::string name;
  std::span<double> values;
};
struct ConstParamBlock {
  std::string name;
  std::span<const double> values;
};

/// Trainable arrays in a fixed order. CPBIRNN first-order terms are not
/// trainable and are not listed.
std::vector<ParamBlock> parameter_blocks(LmModel& m);
std::vector<ConstParamBlock> parameter_blocks(const LmModel& m);

LmModel zeros_like(const LmModel& m);
Index count_parameters(const LmModel& m);

/// Closed-form trainable parameter count, head (vocab n + vocab) included:
///   rnn      n d + n^2 + n (b) + n (h0)
///   mirnn    rnn + 3n
///   2rnn     rnn + n^2 d
///   cprnn    rnn + R (2n + d)
///   cpbirnn  R (2n + d) + n (h0)
Index closed_form_param_count(ModelKind kind, Index n, Index d, Index rank, Index vocab);

/// Weights, factors, tensor entries, gates and biases i.i.d. uniform on
/// [-1/sqrt(n), 1/sqrt(n)]; h0 = 0. The head maps into `d` logits.
LmModel init_params(ModelKind kind, Index n, Index d, Index rank, Activation act, std::uint64_t seed);

/// Per-sequence forward record kept for the backward pass.
struct SequenceCache {
  std::vector<Vector> pre;    // T entries
  std::vector<Vector> h;      // T + 1 entries, h[0] is the starting state
  std::vector<Vector> probs;  // T softmax outputs
  bool from_h0 = true;        // gradient flows into h0 only when true
};

struct ForwardResult {
  double nll = 0.0;  // mean per predicted character, in nats
  double bpc = 0.0;  // nll / ln 2
  std::vector<SequenceCache> caches;
  Matrix final_states;  // n x batch
};

/// `batch` is (batch, T + 1): inputs are columns 0..T-1, targets 1..T. Rows
/// start from `initial_states` (n x batch) when given, detached from h0.
ForwardResult forward_loss(const LmModel& m, const TokenMatrix& batch, const Matrix* initial_states = nullptr);

/// Exact gradient of the mean NLL of `forward_loss` w.r.t. every trainable
/// parameter, truncated at the window start.
Gradients backward(const LmModel& m, std::span<const SequenceCache> caches, const TokenMatrix& batch);

struct BatchGradients {
  Gradients grads;
  double nll = 0.0;
  Matrix final_states;
};

/// Forward + backward for a batch. Each row's gradient is computed into its
/// own buffer and the buffers are summed in row order, so the serial and
/// OpenMP paths agree bit for bit.
BatchGradients batch_gradients(const LmModel& m, const TokenMatrix& batch, const Matrix* initial_states,
                               Exec exec = Exec::parallel);

/// Scales the gradients so their global L2 norm is at most max_norm;
/// returns the norm before clipping.
double clip_global_norm(Gradients& g, double max_norm);

enum class Precision { f64, f32 };

struct TrainConfig {
  int seq_len = 50;
  int batch_size = 128;
  double lr0 = 1e-3;
  double plateau_factor = 0.5;
  int plateau_patience = 2;
  double plateau_min_delta = 1e-4;
  int early_stop_patience = 5;
  int max_epochs = 50;
  /// 0 disables clipping.
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 0;
  Precision precision = Precision::f64;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct TrainState {
  Gradients m;  // first moments
  Gradients v;  // second moments
  long step = 0;
  double lr = 1e-3;
  double best_val = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;
  int plateau_bad_epochs = 0;
};

TrainState init_train_state(const LmModel& m, const TrainConfig& cfg);

void adam_step(TrainState& state, const Gradients& grads, LmModel& params, const TrainConfig& cfg);

/// Records one validation loss. An epoch counts as an improvement when the
/// loss beats the best so far by more than plateau_min_delta; lr is scaled by
/// plateau_factor after plateau_patience epochs without one, and the
/// early-stopping counter tracks the same events. Returns true on improvement.
bool scheduler_step(TrainState& state, double val_loss, const TrainConfig& cfg);

bool should_stop(const TrainState& state, const TrainConfig& cfg);

struct EvalResult {
  double nll = 0.0;
  double bpc = 0.0;
  Index chars = 0;
};

/// Mean NLL of predicting tokens 1..N-1 of `stream`. The stream is cut into
/// `streams` contiguous chunks, each run from h0 without truncation.
EvalResult evaluate(const LmModel& m, std::span<const Token> stream, int streams, Exec exec = Exec::parallel);

struct EpochMetrics {
  int epoch = 0;
  std::string split;  // "train" or "valid"
  double nll = 0.0;
  double bpc = 0.0;
  double lr = 0.0;
  double elapsed_s = 0.0;
};

struct TrainResult {
  LmModel best;
  std::vector<EpochMetrics> history;
  double best_valid_nll = std::numeric_limits<double>::infinity();
  int epochs_run = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Stateful truncated BPTT. Each epoch the training stream is shifted by a
/// seeded offset in [0, seq_len) (less for very short streams), cut into batch_size parallel streams and
/// walked window by window with the hidden state carried (detached) between
/// windows. Returns the parameters with the best validation loss.
TrainResult train(const LmModel& init, std::span<const Token> train_stream, std::span<const Token> valid_stream,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {}, Exec exec = Exec::parallel);

}  // namespace cprnn
