#pragma once

// Exact conversions between model families. Each one returns parameters
// computing the same hidden trajectories (or the same outputs after a
// linear read-out) as its input.

#include <cstdint>
#include <optional>
#include <utility>

#include "cprnn/cells.hpp"

namespace cprnn {

/// Same model with one extra all-zero rank-one term.
CpRnnParams pad_rank(const CpRnnParams& p);

/// CPRNN whose factors are the exact slice decomposition of A, of rank
/// min{nd, n^2}.
CpRnnParams saturate_to_2rnn(const SecondOrderParams& p);

/// Rank-0 CPRNN with the RNN's first-order terms.
CpRnnParams rnn_as_cprnn(const RnnParams& p);

/// Rank-n CPRNN with A = V^T, B = U^T, C = diag(alpha) and first-order
/// terms diag(beta1) V, diag(beta2) U.
CpRnnParams embed_mirnn(const MiRnnParams& p);

struct WithReadout {
  CpRnnParams model;
  Matrix readout;  // q x hidden
};

/// CPBIRNN of hidden size n+1 whose extra coordinate stays at zero, with a
/// read-out padded by a zero column.
WithReadout pad_hidden(const CpRnnParams& p, const Matrix& readout);

/// Inverse direction for linear CPBIRNNs: hidden size n+1 -> n, valid when
/// the target size n is at least the rank R. Uses an orthonormal basis of
/// the space the hidden states live in, found by column-pivoted QR at
/// relative threshold `rank_tol`.
WithReadout reduce_hidden(const CpRnnParams& p, const Matrix& readout, double rank_tol = 1e-10);

struct EquivalenceOptions {
  int n_seqs = 20;
  int seq_len = 10;
  std::uint64_t seed = 0;
};

/// Max abs deviation between the two models over seeded random input
/// sequences (entries uniform on [-1, 1]). With read-outs the compared
/// quantity is readout * h, otherwise the hidden states themselves.
double equivalence_certificate(const CellParams& m1, const CellParams& m2, const EquivalenceOptions& options = {},
                               const Matrix* readout1 = nullptr, const Matrix* readout2 = nullptr);

/// Columns a1(e_1) ... a1(e_d): the first pre-activation for each one-hot
/// input, n x d.
Matrix first_preactivation_image(const CellParams& cell);

/// Number of singular values above rel_tol * sigma_max.
Index numerical_rank(const Matrix& m, double rel_tol = 1e-9);

/// CPBIRNN of the given rank with diag(A^T h0) = I (first row of A all ones,
/// h0 = e_1) and random B, C, so its first-step image has dimension
/// min(rank, n, d).
CpRnnParams strictness_witness_model(Index n, Index d, Index rank, Activation act, std::uint64_t seed);

}  // namespace cprnn
