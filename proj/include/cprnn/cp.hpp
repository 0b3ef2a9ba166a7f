#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cprnn/exec.hpp"
#include "cprnn/tensor.hpp"

namespace cprnn {

/// Factor matrices of [[A, B, C]] = sum_r a_r o b_r o c_r. All three share
/// the column count R; R = 0 is the zero tensor of the stored row counts.
class CpFactors {
 public:
  CpFactors() = default;
  /// Rank-0 factors of the given dims.
  explicit CpFactors(Dims3 dims);
  CpFactors(Matrix a, Matrix b, Matrix c);

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  const Matrix& c() const { return c_; }
  Matrix& a() { return a_; }
  Matrix& b() { return b_; }
  Matrix& c() { return c_; }

  Index rank() const { return a_.cols(); }
  Dims3 dims() const { return {a_.rows(), b_.rows(), c_.rows()}; }

  /// Throws DimensionError when the column counts disagree (possible after
  /// mutation through the non-const accessors).
  void validate() const;

 private:
  Matrix a_, b_, c_;
};

Tensor3 reconstruct(const CpFactors& f);

/// C (A^T h .* B^T x), the CP contraction without forming the tensor.
Vector factored_contract(const CpFactors& f, const Vector& h, const Vector& x);

/// Appends one zero column to each factor.
CpFactors pad_with_zero_column(const CpFactors& f);

struct AlsConfig {
  int max_iters = 500;
  /// Stop when the relative misfit changes by less than this.
  double tol = 1e-10;
  int restarts = 5;
  std::uint64_t seed = 0;
  /// Ridge added to the Gram matrix of every least-squares solve.
  double ridge = 1e-12;
  /// Adds one start from the generalized eigenvectors of two random mixtures
  /// of the mode-3 slices. Used only when the first two dims are >= rank.
  bool algebraic_start = true;
};

struct AlsResult {
  CpFactors factors;
  /// 1 - ||T - [[A,B,C]]||_F / ||T||_F.
  double fit = 0.0;
  int iterations = 0;
  int best_restart = 0;
  /// Relative misfit after initialisation and after every sweep of the
  /// winning restart.
  std::vector<double> misfit_history;
};

/// Alternating least squares, best of `config.restarts` random starts.
/// `warm_start`, when given, is fitted as an extra restart with index 0; the
/// algebraic start, when enabled and applicable, comes last.
AlsResult als_fit(const Tensor3& t, Index rank, const AlsConfig& config, Exec exec = Exec::parallel,
                  const CpFactors* warm_start = nullptr);

/// One term e_i o e_j o T(i, j, :) per index pair of the two axes whose
/// dimension product is smallest (ties prefer (1,2), then (1,3)).
CpFactors exact_slice_decomposition(const Tensor3& t);

struct RankReport {
  int estimated_rank = 0;
  std::vector<std::pair<int, double>> fits;
  int restarts_used = 0;
  double tolerance = 1e-6;
  bool converged = true;
};

/// Smallest R in 1..max_rank whose ALS fit reaches 1 - tolerance. The zero
/// tensor reports rank 0. Each candidate after the first also gets a warm
/// start from the previous winner plus a small random column, which keeps
/// the fit sequence monotone.
RankReport estimate_cp_rank(const Tensor3& t, int max_rank, const AlsConfig& config, double tolerance = 1e-6,
                            Exec exec = Exec::parallel);

/// min{d1 d2, d1 d3, d2 d3}, an upper bound on the maximal CP rank.
Index max_rank_upper_bound(Index d1, Index d2, Index d3);

/// n^2 d / (2n + d - 2), a lower bound on the smallest typical rank of
/// n x d x n tensors.
double typical_rank_lower_bound(Index n, Index d);

}  // namespace cprnn
