#include "cprnn/witness.hpp"

#include "cprnn/errors.hpp"

namespace cprnn {

std::string_view to_string(WitnessKind kind) {
  return kind == WitnessKind::second_preactivation ? "S_h" : "S_alpha";
}

namespace {

bool first_order_is_zero(const Matrix& U, const Matrix& V, const Vector& b) {
  return U.isZero(0.0) && V.isZero(0.0) && b.isZero(0.0);
}

Index rank_of(const CellParams& cell) {
  if (const auto* cp = std::get_if<CpRnnParams>(&cell)) return cp->rank();
  const auto& so = std::get<SecondOrderParams>(cell);
  // A dense tensor has CP rank at most the slice bound.
  return max_rank_upper_bound(so.A.dims().d1, so.A.dims().d2, so.A.dims().d3);
}

// Fills S(i, j, :) = f(i, j) for all one-hot pairs.
template <typename Fiber>
Tensor3 fill_pairs(Index d, Index n, Exec exec, Fiber&& fiber) {
  Tensor3 s({d, d, n});
  auto row = [&](Index i) {
    for (Index j = 0; j < d; ++j) {
      const Vector v = fiber(i, j);
      auto out = s.fiber(i, j);
      for (Index k = 0; k < n; ++k) out[k] = v[k];
    }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < d; ++i) row(i);
  } else {
    for (Index i = 0; i < d; ++i) row(i);
  }
  return s;
}

}  // namespace

WitnessTensor witness_bruteforce(const CellParams& cell, Exec exec) {
  validate(cell);
  if (const auto* cp = std::get_if<CpRnnParams>(&cell)) {
    if (!cp->bilinear_only) throw ScopeError("witness_bruteforce: S_h is defined for bilinear models (CPBIRNN)");
  } else if (const auto* so = std::get_if<SecondOrderParams>(&cell)) {
    if (!first_order_is_zero(so->U, so->V, so->b))
      throw ScopeError("witness_bruteforce: S_h is defined for bilinear models (2RNN with U = V = b = 0)");
  } else {
    throw ScopeError("witness_bruteforce: S_h needs a CPBIRNN or a bilinear 2RNN");
  }
  const Index n = hidden_size(cell);
  const Index d = input_size(cell);
  const Vector& h0 = initial_state(cell);
  WitnessTensor w;
  w.kind = WitnessKind::second_preactivation;
  w.source_rank = rank_of(cell);
  w.tensor = fill_pairs(d, n, exec, [&](Index i, Index j) {
    const Step first = step(cell, h0, Vector::Unit(d, i));
    return step(cell, first.h, Vector::Unit(d, j)).pre;
  });
  return w;
}

WitnessTensor witness_closed_form(const CpRnnParams& p) {
  p.validate();
  if (!p.bilinear_only) throw ScopeError("witness_closed_form: S_h closed form holds for CPBIRNNs");
  if (p.act == Activation::relu)
    throw ScopeError("witness_closed_form: the closed form is stated for invertible activations (linear, tanh)");
  const Matrix& A = p.cp.a();
  const Matrix& B = p.cp.b();
  const Matrix& C = p.cp.c();
  const Matrix inner = B * (A.transpose() * p.h0).asDiagonal() * C.transpose();  // d x n
  const Matrix first_states =
      p.act == Activation::tanh ? Matrix(inner.array().tanh().matrix()) : inner;  // row i = h1(e_i)
  WitnessTensor w;
  w.kind = WitnessKind::second_preactivation;
  w.source_rank = p.rank();
  w.tensor = reconstruct(CpFactors(first_states * A, B, C));
  return w;
}

Matrix alpha_left_factor(const CpRnnParams& p) {
  const Matrix& A = p.cp.a();
  const Matrix& B = p.cp.b();
  const Matrix& C = p.cp.c();
  return p.U.transpose() + B * (A.transpose() * p.h0).asDiagonal() * C.transpose();
}

WitnessTensor witness_alpha(const CpRnnParams& p) {
  p.validate();
  if (p.act != Activation::linear)
    throw ScopeError("witness_alpha: the bilinear part is only separable for a linear activation");
  WitnessTensor w;
  w.kind = WitnessKind::bilinear_part;
  w.source_rank = p.rank();
  w.tensor = reconstruct(CpFactors(alpha_left_factor(p) * p.cp.a(), p.cp.b(), p.cp.c()));
  return w;
}

WitnessTensor witness_alpha_bruteforce(const CpRnnParams& p, Exec exec) {
  p.validate();
  if (p.act != Activation::linear)
    throw ScopeError("witness_alpha_bruteforce: the bilinear part is only separable for a linear activation");
  const Index n = p.hidden_size();
  const Index d = p.input_size();
  auto h2 = [&](const Vector& x1, const Vector& x2) {
    const Step first = cprnn_step(p, p.h0, x1);
    return cprnn_step(p, first.h, x2).h;
  };
  const Vector zero = Vector::Zero(d);
  const Vector h00 = h2(zero, zero);
  std::vector<Vector> first_only(static_cast<std::size_t>(d));
  std::vector<Vector> second_only(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) {
    first_only[i] = h2(Vector::Unit(d, i), zero);
    second_only[i] = h2(zero, Vector::Unit(d, i));
  }
  WitnessTensor w;
  w.kind = WitnessKind::bilinear_part;
  w.source_rank = p.rank();
  w.tensor = fill_pairs(d, n, exec, [&](Index i, Index j) -> Vector {
    return h2(Vector::Unit(d, i), Vector::Unit(d, j)) - first_only[i] - second_only[j] + h00;
  });
  return w;
}

RankBoundResult rank_bound_check(WitnessTensor& w, const AlsConfig& config, double tolerance, Exec exec) {
  const int max_rank = static_cast<int>(w.source_rank) + 2;
  RankBoundResult out;
  out.report = estimate_cp_rank(w.tensor, max_rank, config, tolerance, exec);
  out.bound_holds = !out.report.converged || out.report.estimated_rank <= w.source_rank;
  w.rank_report = out.report;
  return out;
}

}  // namespace cprnn
