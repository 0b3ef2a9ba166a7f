#include "cprnn/cells.hpp"

#include <cmath>

#include "cprnn/errors.hpp"
#include "cprnn/random.hpp"

namespace cprnn {

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::linear: return "linear";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "linear") return Activation::linear;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw DataError("unknown activation '" + std::string(name) + "' (expected linear, tanh or relu)");
}

Vector activate(Activation act, const Vector& pre) {
  switch (act) {
    case Activation::linear: return pre;
    case Activation::tanh: return pre.array().tanh().matrix();
    case Activation::relu: return pre.cwiseMax(0.0);
  }
  return pre;
}

Vector activation_derivative(Activation act, const Vector& pre, const Vector& post) {
  switch (act) {
    case Activation::linear: return Vector::Ones(pre.size());
    case Activation::tanh: return (1.0 - post.array().square()).matrix();
    case Activation::relu: return (pre.array() > 0.0).cast<double>().matrix();
  }
  return Vector::Ones(pre.size());
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::rnn: return "rnn";
    case ModelKind::second_order: return "2rnn";
    case ModelKind::cprnn: return "cprnn";
    case ModelKind::cpbirnn: return "cpbirnn";
    case ModelKind::mirnn: return "mirnn";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "rnn") return ModelKind::rnn;
  if (name == "2rnn") return ModelKind::second_order;
  if (name == "cprnn") return ModelKind::cprnn;
  if (name == "cpbirnn") return ModelKind::cpbirnn;
  if (name == "mirnn") return ModelKind::mirnn;
  throw DataError("unknown model kind '" + std::string(name) + "' (expected rnn, 2rnn, cprnn, cpbirnn or mirnn)");
}

namespace {

void expect(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

void validate_first_order(const Vector& h0, const Matrix& U, const Matrix& V, const Vector& b, const char* family) {
  const Index n = V.rows();
  const std::string f(family);
  expect(V.cols() == n, f + ": V must be square");
  expect(U.rows() == n, f + ": U must have n rows");
  expect(b.size() == n, f + ": b must have length n");
  expect(h0.size() == n, f + ": h0 must have length n");
}

void check_inputs(Index n, Index d, const Vector& h, const Vector& x) {
  if (h.size() != n)
    throw DimensionError("hidden state has length " + std::to_string(h.size()) + ", expected " + std::to_string(n));
  if (x.size() != d)
    throw DimensionError("input has length " + std::to_string(x.size()) + ", expected " + std::to_string(d));
}

}  // namespace

void RnnParams::validate() const { validate_first_order(h0, U, V, b, "rnn"); }

void SecondOrderParams::validate() const {
  validate_first_order(h0, U, V, b, "2rnn");
  const Dims3 expected{hidden_size(), input_size(), hidden_size()};
  expect(A.dims() == expected, "2rnn: tensor dims " + to_string(A.dims()) + ", expected " + to_string(expected));
}

void CpRnnParams::validate() const {
  validate_first_order(h0, U, V, b, "cprnn");
  cp.validate();
  const Dims3 expected{hidden_size(), input_size(), hidden_size()};
  expect(cp.dims() == expected, "cprnn: factor dims " + to_string(cp.dims()) + ", expected " + to_string(expected));
  if (bilinear_only)
    expect(U.isZero(0.0) && V.isZero(0.0) && b.isZero(0.0), "cpbirnn: first-order terms and bias must be zero");
}

void MiRnnParams::validate() const {
  validate_first_order(h0, U, V, b, "mirnn");
  const Index n = hidden_size();
  expect(alpha.size() == n && beta1.size() == n && beta2.size() == n, "mirnn: gate vectors must have length n");
}

ModelKind kind_of(const CellParams& cell) {
  switch (cell.index()) {
    case 0: return ModelKind::rnn;
    case 1: return ModelKind::second_order;
    case 2: return std::get<CpRnnParams>(cell).bilinear_only ? ModelKind::cpbirnn : ModelKind::cprnn;
    default: return ModelKind::mirnn;
  }
}

Index hidden_size(const CellParams& cell) {
  return std::visit([](const auto& p) { return p.hidden_size(); }, cell);
}

Index input_size(const CellParams& cell) {
  return std::visit([](const auto& p) { return p.input_size(); }, cell);
}

const Vector& initial_state(const CellParams& cell) {
  return std::visit([](const auto& p) -> const Vector& { return p.h0; }, cell);
}

Activation activation_of(const CellParams& cell) {
  return std::visit([](const auto& p) { return p.act; }, cell);
}

void validate(const CellParams& cell) {
  std::visit([](const auto& p) { p.validate(); }, cell);
}

CellParams random_cell(ModelKind kind, Index n, Index d, Index rank, Activation act, std::uint64_t seed,
                       double scale) {
  // One stream for all kinds: h0, U, V, b coincide across families for a seed.
  auto rng = make_rng(seed);
  const double lo = -scale;
  const double hi = scale;
  Vector h0 = random_uniform(n, lo, hi, rng);
  Matrix U = random_uniform(n, d, lo, hi, rng);
  Matrix V = random_uniform(n, n, lo, hi, rng);
  Vector b = random_uniform(n, lo, hi, rng);
  switch (kind) {
    case ModelKind::rnn: return RnnParams{h0, U, V, b, act};
    case ModelKind::second_order: {
      Tensor3 A = random_uniform(Dims3{n, d, n}, lo, hi, rng);
      return SecondOrderParams{h0, std::move(A), U, V, b, act};
    }
    case ModelKind::cprnn:
    case ModelKind::cpbirnn: {
      Matrix a = random_uniform(n, rank, lo, hi, rng);
      Matrix bf = random_uniform(d, rank, lo, hi, rng);
      Matrix c = random_uniform(n, rank, lo, hi, rng);
      CpRnnParams p{h0, CpFactors(std::move(a), std::move(bf), std::move(c)), U, V, b, act, false};
      if (kind == ModelKind::cpbirnn) {
        p.bilinear_only = true;
        p.U.setZero();
        p.V.setZero();
        p.b.setZero();
      }
      return p;
    }
    case ModelKind::mirnn: {
      Vector alpha = random_uniform(n, lo, hi, rng);
      Vector beta1 = random_uniform(n, lo, hi, rng);
      Vector beta2 = random_uniform(n, lo, hi, rng);
      return MiRnnParams{h0, alpha, beta1, beta2, U, V, b, act};
    }
  }
  throw DataError("random_cell: unknown kind");
}

Step rnn_step(const RnnParams& p, const Vector& h, const Vector& x) {
  check_inputs(p.hidden_size(), p.input_size(), h, x);
  Step s;
  s.pre = p.V * h + p.U * x + p.b;
  s.h = activate(p.act, s.pre);
  return s;
}

Step second_order_step(const SecondOrderParams& p, const Vector& h, const Vector& x) {
  check_inputs(p.hidden_size(), p.input_size(), h, x);
  Step s;
  s.pre = bilinear_contract(p.A, h, x) + p.V * h + p.U * x + p.b;
  s.h = activate(p.act, s.pre);
  return s;
}

Step cprnn_step(const CpRnnParams& p, const Vector& h, const Vector& x) {
  check_inputs(p.hidden_size(), p.input_size(), h, x);
  Step s;
  if (p.bilinear_only) s.pre = factored_contract(p.cp, h, x);
  else s.pre = factored_contract(p.cp, h, x) + p.V * h + p.U * x + p.b;
  s.h = activate(p.act, s.pre);
  return s;
}

Step mirnn_step(const MiRnnParams& p, const Vector& h, const Vector& x) {
  check_inputs(p.hidden_size(), p.input_size(), h, x);
  const Vector vh = p.V * h;
  const Vector ux = p.U * x;
  Step s;
  s.pre = (p.alpha.array() * vh.array() * ux.array() + p.beta1.array() * vh.array() + p.beta2.array() * ux.array() +
           p.b.array())
              .matrix();
  s.h = activate(p.act, s.pre);
  return s;
}

Step step(const CellParams& cell, const Vector& h, const Vector& x) {
  return std::visit(
      [&](const auto& p) -> Step {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, RnnParams>) return rnn_step(p, h, x);
        else if constexpr (std::is_same_v<P, SecondOrderParams>) return second_order_step(p, h, x);
        else if constexpr (std::is_same_v<P, CpRnnParams>) return cprnn_step(p, h, x);
        else return mirnn_step(p, h, x);
      },
      cell);
}

Trajectory run_sequence(const CellParams& cell, std::span<const Vector> inputs) {
  validate(cell);
  Trajectory out;
  out.pres.reserve(inputs.size());
  out.hiddens.reserve(inputs.size());
  Vector h = initial_state(cell);
  for (const Vector& x : inputs) {
    Step s = step(cell, h, x);
    h = s.h;
    out.pres.push_back(std::move(s.pre));
    out.hiddens.push_back(std::move(s.h));
  }
  return out;
}

}  // namespace cprnn
