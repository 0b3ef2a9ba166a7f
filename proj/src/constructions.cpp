#include "cprnn/constructions.hpp"

#include <algorithm>
#include <cmath>

#include "cprnn/errors.hpp"
#include "cprnn/random.hpp"

namespace cprnn {

CpRnnParams pad_rank(const CpRnnParams& p) {
  CpRnnParams out = p;
  out.cp = pad_with_zero_column(p.cp);
  return out;
}

CpRnnParams saturate_to_2rnn(const SecondOrderParams& p) {
  p.validate();
  CpRnnParams out;
  out.h0 = p.h0;
  out.cp = exact_slice_decomposition(p.A);
  out.U = p.U;
  out.V = p.V;
  out.b = p.b;
  out.act = p.act;
  return out;
}

CpRnnParams rnn_as_cprnn(const RnnParams& p) {
  p.validate();
  CpRnnParams out;
  out.h0 = p.h0;
  out.cp = CpFactors(Dims3{p.hidden_size(), p.input_size(), p.hidden_size()});
  out.U = p.U;
  out.V = p.V;
  out.b = p.b;
  out.act = p.act;
  return out;
}

CpRnnParams embed_mirnn(const MiRnnParams& p) {
  p.validate();
  CpRnnParams out;
  out.h0 = p.h0;
  out.cp = CpFactors(p.V.transpose(), p.U.transpose(), Matrix(p.alpha.asDiagonal()));
  out.V = p.beta1.asDiagonal() * p.V;
  out.U = p.beta2.asDiagonal() * p.U;
  out.b = p.b;
  out.act = p.act;
  return out;
}

WithReadout pad_hidden(const CpRnnParams& p, const Matrix& readout) {
  p.validate();
  if (!p.bilinear_only) throw ScopeError("pad_hidden: hidden-size padding is defined for CPBIRNNs (no first-order terms)");
  const Index n = p.hidden_size();
  const Index d = p.input_size();
  const Index r = p.rank();
  if (readout.cols() != n) throw DimensionError("pad_hidden: read-out must have n columns");

  CpRnnParams out;
  out.act = p.act;
  out.bilinear_only = true;
  out.h0 = Vector::Zero(n + 1);
  out.h0.head(n) = p.h0;
  Matrix a = Matrix::Zero(n + 1, r);
  Matrix c = Matrix::Zero(n + 1, r);
  a.topRows(n) = p.cp.a();
  c.topRows(n) = p.cp.c();
  out.cp = CpFactors(std::move(a), p.cp.b(), std::move(c));
  out.U = Matrix::Zero(n + 1, d);
  out.V = Matrix::Zero(n + 1, n + 1);
  out.b = Vector::Zero(n + 1);

  Matrix w = Matrix::Zero(readout.rows(), n + 1);
  w.leftCols(n) = readout;
  return {std::move(out), std::move(w)};
}

WithReadout reduce_hidden(const CpRnnParams& p, const Matrix& readout, double rank_tol) {
  p.validate();
  if (!p.bilinear_only)
    throw ScopeError("reduce_hidden: hidden-size saturation is only established for CPBIRNNs (no first-order terms)");
  if (p.act != Activation::linear)
    throw ScopeError("reduce_hidden: hidden-size saturation requires a linear activation; with " +
                     std::string(to_string(p.act)) + " the read-out cannot absorb the basis change");
  const Index big = p.hidden_size();
  const Index n = big - 1;
  const Index r = p.rank();
  const Index d = p.input_size();
  if (n < 1) throw DimensionError("reduce_hidden: hidden size must be at least 2");
  if (n < r)
    throw ScopeError("reduce_hidden: target hidden size " + std::to_string(n) + " is below the rank " +
                     std::to_string(r) + "; the rank is the bottleneck and the hidden size cannot shrink");
  if (readout.cols() != big) throw DimensionError("reduce_hidden: read-out must have n+1 columns");

  const Matrix& a_big = p.cp.a();
  const Matrix& c_big = p.cp.c();

  // For t >= 1 every hidden state lies in col(C); h0 may add one direction.
  // An orthonormal basis Q of that span turns h = Q s into an exact change of
  // variables whenever the span fits in n dimensions.
  Matrix basis_input(big, r + 1);
  basis_input << c_big, p.h0;
  Eigen::ColPivHouseholderQR<Matrix> with_h0(basis_input);
  with_h0.setThreshold(rank_tol);

  Matrix q;
  Vector h0;
  if (with_h0.rank() <= n) {
    q = Matrix(with_h0.householderQ()).leftCols(n);
    h0 = q.transpose() * p.h0;
  } else {
    // col(C) alone still fits (rank <= R <= n); h0 only enters through
    // A^T h0, so solve for a reduced h0 reproducing that R-vector.
    Eigen::ColPivHouseholderQR<Matrix> c_only(c_big);
    c_only.setThreshold(rank_tol);
    q = Matrix(c_only.householderQ()).leftCols(n);
    const Matrix g = a_big.transpose() * q;
    const Vector rhs = a_big.transpose() * p.h0;
    h0 = g.completeOrthogonalDecomposition().solve(rhs);
    const double residual = (g * h0 - rhs).norm();
    if (residual > 1e-10 * std::max(1.0, rhs.norm()))
      throw NumericalError("reduce_hidden: no exact reduction exists for this degenerate initial state (residual " +
                           std::to_string(residual) + ")");
  }

  CpRnnParams out;
  out.act = p.act;
  out.bilinear_only = true;
  out.h0 = h0;
  out.cp = CpFactors(q.transpose() * a_big, p.cp.b(), q.transpose() * c_big);
  out.U = Matrix::Zero(n, d);
  out.V = Matrix::Zero(n, n);
  out.b = Vector::Zero(n);
  return {std::move(out), readout * q};
}

double equivalence_certificate(const CellParams& m1, const CellParams& m2, const EquivalenceOptions& options,
                               const Matrix* readout1, const Matrix* readout2) {
  validate(m1);
  validate(m2);
  const Index d = input_size(m1);
  if (input_size(m2) != d) throw DimensionError("equivalence_certificate: models disagree on input size");
  if ((readout1 == nullptr) != (readout2 == nullptr))
    throw DimensionError("equivalence_certificate: give read-outs for both models or neither");
  if (readout1) {
    if (readout1->cols() != hidden_size(m1) || readout2->cols() != hidden_size(m2) ||
        readout1->rows() != readout2->rows())
      throw DimensionError("equivalence_certificate: read-out shapes do not match the models");
  } else if (hidden_size(m1) != hidden_size(m2)) {
    throw DimensionError("equivalence_certificate: hidden sizes differ; compare through read-outs");
  }

  double worst = 0.0;
  for (int s = 0; s < options.n_seqs; ++s) {
    auto rng = make_rng(options.seed, {static_cast<std::uint64_t>(s)});
    std::vector<Vector> inputs;
    inputs.reserve(static_cast<std::size_t>(options.seq_len));
    for (int t = 0; t < options.seq_len; ++t) inputs.push_back(random_uniform(d, -1.0, 1.0, rng));
    const Trajectory t1 = run_sequence(m1, inputs);
    const Trajectory t2 = run_sequence(m2, inputs);
    for (std::size_t t = 0; t < inputs.size(); ++t) {
      const double dev = readout1 ? (*readout1 * t1.hiddens[t] - *readout2 * t2.hiddens[t]).cwiseAbs().maxCoeff()
                                  : (t1.hiddens[t] - t2.hiddens[t]).cwiseAbs().maxCoeff();
      if (!std::isfinite(dev)) throw NumericalError("equivalence_certificate: non-finite trajectory");
      worst = std::max(worst, dev);
    }
  }
  return worst;
}

Matrix first_preactivation_image(const CellParams& cell) {
  validate(cell);
  const Index n = hidden_size(cell);
  const Index d = input_size(cell);
  Matrix image(n, d);
  for (Index j = 0; j < d; ++j) image.col(j) = step(cell, initial_state(cell), Vector::Unit(d, j)).pre;
  return image;
}

Index numerical_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  return (s.array() > rel_tol * s[0]).count();
}

CpRnnParams strictness_witness_model(Index n, Index d, Index rank, Activation act, std::uint64_t seed) {
  auto rng = make_rng(seed, {0x57495453ULL});
  CpRnnParams p;
  p.act = act;
  p.bilinear_only = true;
  Matrix a = random_uniform(n, rank, -1.0, 1.0, rng);
  a.row(0).setOnes();
  Matrix b = random_uniform(d, rank, -1.0, 1.0, rng);
  Matrix c = random_uniform(n, rank, -1.0, 1.0, rng);
  p.cp = CpFactors(std::move(a), std::move(b), std::move(c));
  p.h0 = Vector::Unit(n, 0);
  p.U = Matrix::Zero(n, d);
  p.V = Matrix::Zero(n, n);
  p.b = Vector::Zero(n);
  return p;
}

}  // namespace cprnn
