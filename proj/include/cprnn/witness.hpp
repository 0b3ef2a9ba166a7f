#pragma once

// Witness tensors of length-2 one-hot computations. Their CP rank is
// bounded by the rank of the model that produced them, which is what makes
// them useful for separating CPRNNs of different rank.

#include <optional>
#include <string_view>

#include "cprnn/cells.hpp"
#include "cprnn/cp.hpp"
#include "cprnn/exec.hpp"

namespace cprnn {

enum class WitnessKind {
  /// S_h(i, j, :) = a2(e_i, e_j), second pre-activation of a bilinear model.
  second_preactivation,
  /// S_alpha(i, j, :) = purely bilinear part of h2(e_i, e_j) for a linear CPRNN.
  bilinear_part,
};

std::string_view to_string(WitnessKind kind);

struct WitnessTensor {
  WitnessKind kind = WitnessKind::second_preactivation;
  Tensor3 tensor;  // d x d x n
  Index source_rank = 0;
  std::optional<RankReport> rank_report;
};

/// Runs the cell on every one-hot pair (e_i, e_j) and records a2. Accepts a
/// CPBIRNN or a 2RNN without first-order terms.
WitnessTensor witness_bruteforce(const CellParams& cell, Exec exec = Exec::parallel);

/// [[s(B diag(A^T h0) C^T) A, B, C]] for a CPBIRNN with linear or tanh.
WitnessTensor witness_closed_form(const CpRnnParams& p);

/// [[(U^T + B diag(A^T h0) C^T) A, B, C]] for a linear CPRNN.
WitnessTensor witness_alpha(const CpRnnParams& p);

/// h2(e_i,e_j) - h2(e_i,0) - h2(0,e_j) + h2(0,0), by running the cell.
WitnessTensor witness_alpha_bruteforce(const CpRnnParams& p, Exec exec = Exec::parallel);

/// The d x n matrix U^T + B diag(A^T h0) C^T (the first factor's left
/// multiplier in the S_alpha form).
Matrix alpha_left_factor(const CpRnnParams& p);

struct RankBoundResult {
  RankReport report;
  /// estimated_rank <= source_rank; meaningful only when report.converged.
  bool bound_holds = true;
};

/// Rank sweep up to source_rank + 2; stores the report in `w`.
RankBoundResult rank_bound_check(WitnessTensor& w, const AlsConfig& config, double tolerance = 1e-6,
                                 Exec exec = Exec::parallel);

}  // namespace cprnn
