#include <cmath>
#include <numbers>

#include "cprnn/errors.hpp"
#include "cprnn/training.hpp"

namespace cprnn {

namespace {

void check_batch(const LmModel& m, const TokenMatrix& batch, const Matrix* initial_states) {
  m.validate();
  if (batch.cols() < 2) throw DimensionError("batch needs at least two columns (one input, one target)");
  if (batch.rows() < 1) throw DimensionError("batch is empty");
  if (batch.minCoeff() < 0 || batch.maxCoeff() >= m.vocab())
    throw DataError("token index outside the vocabulary of size " + std::to_string(m.vocab()));
  if (initial_states && (initial_states->rows() != m.hidden() || initial_states->cols() != batch.rows()))
    throw DimensionError("initial states must be hidden x batch");
}

// Pre-activation for one-hot input x.
Vector preactivation(const CellParams& cell, const Vector& h, Token x) {
  return std::visit(
      [&](const auto& p) -> Vector {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, RnnParams>) {
          return p.V * h + p.U.col(x) + p.b;
        } else if constexpr (std::is_same_v<P, SecondOrderParams>) {
          const Index n = p.hidden_size();
          Vector bil = Vector::Zero(n);
          for (Index i = 0; i < n; ++i) {
            if (h[i] == 0.0) continue;
            const auto f = p.A.fiber(i, x);
            for (Index k = 0; k < n; ++k) bil[k] += h[i] * f[k];
          }
          return bil + p.V * h + p.U.col(x) + p.b;
        } else if constexpr (std::is_same_v<P, CpRnnParams>) {
          const Vector z = (p.cp.a().transpose() * h).cwiseProduct(p.cp.b().row(x).transpose());
          Vector pre = p.cp.c() * z;
          if (!p.bilinear_only) pre += p.V * h + p.U.col(x) + p.b;
          return pre;
        } else {
          const Vector vh = p.V * h;
          const auto ux = p.U.col(x);
          return (p.alpha.array() * vh.array() * ux.array() + p.beta1.array() * vh.array() +
                  p.beta2.array() * ux.array() + p.b.array())
              .matrix();
        }
      },
      cell);
}

// Accumulates d pre / d theta into g for one step and returns d pre / d h.
Vector step_backward(const CellParams& cell, CellParams& g, const Vector& da, const Vector& h, Token x) {
  return std::visit(
      [&](const auto& p) -> Vector {
        using P = std::decay_t<decltype(p)>;
        auto& gp = std::get<P>(g);
        Vector dh;
        if constexpr (std::is_same_v<P, MiRnnParams>) {
          const Vector vh = p.V * h;
          const Vector ux = p.U.col(x);
          const Vector dvh = (da.array() * (p.alpha.array() * ux.array() + p.beta1.array())).matrix();
          const Vector dux = (da.array() * (p.alpha.array() * vh.array() + p.beta2.array())).matrix();
          gp.alpha.array() += da.array() * vh.array() * ux.array();
          gp.beta1.array() += da.array() * vh.array();
          gp.beta2.array() += da.array() * ux.array();
          gp.b += da;
          gp.V.noalias() += dvh * h.transpose();
          gp.U.col(x) += dux;
          return p.V.transpose() * dvh;
        } else {
          bool first_order = true;
          if constexpr (std::is_same_v<P, SecondOrderParams>) {
            const Index n = p.hidden_size();
            dh = Vector::Zero(n);
            for (Index i = 0; i < n; ++i) {
              const auto f = p.A.fiber(i, x);
              auto gf = gp.A.fiber(i, x);
              double acc = 0.0;
              for (Index k = 0; k < n; ++k) {
                acc += f[k] * da[k];
                gf[k] += h[i] * da[k];
              }
              dh[i] = acc;
            }
          } else if constexpr (std::is_same_v<P, CpRnnParams>) {
            const Vector pa = p.cp.a().transpose() * h;
            const Vector q = p.cp.b().row(x).transpose();
            const Vector dz = p.cp.c().transpose() * da;
            const Vector dp = dz.cwiseProduct(q);
            gp.cp.c().noalias() += da * pa.cwiseProduct(q).transpose();
            gp.cp.a().noalias() += h * dp.transpose();
            gp.cp.b().row(x) += dz.cwiseProduct(pa).transpose();
            dh = p.cp.a() * dp;
            first_order = !p.bilinear_only;
          } else {
            dh = Vector::Zero(p.hidden_size());
          }
          if (first_order) {
            gp.V.noalias() += da * h.transpose();
            gp.U.col(x) += da;
            gp.b += da;
            dh.noalias() += p.V.transpose() * da;
          }
          return dh;
        }
      },
      cell);
}

SequenceCache sequence_forward(const LmModel& m, const Token* tokens, Index T, const Vector& h_init, bool from_h0,
                               double& nll_sum) {
  const Activation act = activation_of(m.cell);
  SequenceCache c;
  c.from_h0 = from_h0;
  c.pre.reserve(static_cast<std::size_t>(T));
  c.h.reserve(static_cast<std::size_t>(T + 1));
  c.probs.reserve(static_cast<std::size_t>(T));
  c.h.push_back(h_init);
  nll_sum = 0.0;
  for (Index t = 0; t < T; ++t) {
    Vector pre = preactivation(m.cell, c.h.back(), tokens[t]);
    Vector h = activate(act, pre);
    Vector logits = m.out_W * h + m.out_b;
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    nll_sum += lse - logits[tokens[t + 1]];
    c.probs.push_back((logits.array() - lse).exp().matrix());
    c.pre.push_back(std::move(pre));
    c.h.push_back(std::move(h));
  }
  return c;
}

// Unscaled gradient of the summed NLL of one sequence, added into g.
void sequence_backward(const LmModel& m, const SequenceCache& c, const Token* tokens, LmModel& g) {
  const Activation act = activation_of(m.cell);
  const Index T = static_cast<Index>(c.pre.size());
  const Index n = m.hidden();
  Matrix dlogits(m.vocab(), T);
  Matrix hs(n, T);
  for (Index t = 0; t < T; ++t) {
    dlogits.col(t) = c.probs[t];
    dlogits(tokens[t + 1], t) -= 1.0;
    hs.col(t) = c.h[t + 1];
  }
  g.out_W.noalias() += dlogits * hs.transpose();
  g.out_b += dlogits.rowwise().sum();
  const Matrix dh_out = m.out_W.transpose() * dlogits;
  Vector dh_next = Vector::Zero(n);
  for (Index t = T - 1; t >= 0; --t) {
    const Vector dh = dh_out.col(t) + dh_next;
    const Vector da = dh.cwiseProduct(activation_derivative(act, c.pre[t], c.h[t + 1]));
    dh_next = step_backward(m.cell, g.cell, da, c.h[t], tokens[t]);
  }
  if (c.from_h0) std::visit([&](auto& gp) { gp.h0 += dh_next; }, g.cell);
}

void add_into(LmModel& dst, const LmModel& src) {
  auto d = parameter_blocks(dst);
  const auto s = parameter_blocks(src);
  for (std::size_t b = 0; b < d.size(); ++b)
    for (std::size_t i = 0; i < d[b].values.size(); ++i) d[b].values[i] += s[b].values[i];
}

void scale(LmModel& g, double f) {
  for (auto& block : parameter_blocks(g))
    for (double& v : block.values) v *= f;
}

template <typename Body>
void for_rows(Index rows, Exec exec, Body&& body) {
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (Index r = 0; r < rows; ++r) body(r);
  } else {
    for (Index r = 0; r < rows; ++r) body(r);
  }
}

Gradients reduce_rows(const LmModel& m, std::vector<Gradients>& per_row, double factor) {
  Gradients total = zeros_like(m);
  for (const auto& g : per_row) add_into(total, g);
  scale(total, factor);
  return total;
}

}  // namespace

ForwardResult forward_loss(const LmModel& m, const TokenMatrix& batch, const Matrix* initial_states) {
  check_batch(m, batch, initial_states);
  const Index B = batch.rows();
  const Index T = batch.cols() - 1;
  ForwardResult out;
  out.caches.resize(static_cast<std::size_t>(B));
  out.final_states.resize(m.hidden(), B);
  double total = 0.0;
  for (Index r = 0; r < B; ++r) {
    const Vector h_init = initial_states ? Vector(initial_states->col(r)) : initial_state(m.cell);
    double nll = 0.0;
    out.caches[r] = sequence_forward(m, batch.row(r).data(), T, h_init, initial_states == nullptr, nll);
    out.final_states.col(r) = out.caches[r].h.back();
    total += nll;
  }
  out.nll = total / static_cast<double>(B * T);
  out.bpc = out.nll / std::numbers::ln2;
  return out;
}

Gradients backward(const LmModel& m, std::span<const SequenceCache> caches, const TokenMatrix& batch) {
  check_batch(m, batch, nullptr);
  if (static_cast<Index>(caches.size()) != batch.rows()) throw DimensionError("one cache per batch row expected");
  const Index T = batch.cols() - 1;
  std::vector<Gradients> per_row(caches.size(), zeros_like(m));
  for (Index r = 0; r < batch.rows(); ++r) sequence_backward(m, caches[r], batch.row(r).data(), per_row[r]);
  return reduce_rows(m, per_row, 1.0 / static_cast<double>(batch.rows() * T));
}

BatchGradients batch_gradients(const LmModel& m, const TokenMatrix& batch, const Matrix* initial_states, Exec exec) {
  check_batch(m, batch, initial_states);
  const Index B = batch.rows();
  const Index T = batch.cols() - 1;
  std::vector<Gradients> per_row(static_cast<std::size_t>(B), zeros_like(m));
  std::vector<double> nll(static_cast<std::size_t>(B), 0.0);
  BatchGradients out;
  out.final_states.resize(m.hidden(), B);
  for_rows(B, exec, [&](Index r) {
    const Vector h_init = initial_states ? Vector(initial_states->col(r)) : initial_state(m.cell);
    const Token* tokens = batch.row(r).data();
    const SequenceCache c = sequence_forward(m, tokens, T, h_init, initial_states == nullptr, nll[r]);
    out.final_states.col(r) = c.h.back();
    sequence_backward(m, c, tokens, per_row[r]);
  });
  double total = 0.0;
  for (double v : nll) total += v;
  out.nll = total / static_cast<double>(B * T);
  out.grads = reduce_rows(m, per_row, 1.0 / static_cast<double>(B * T));
  return out;
}

double clip_global_norm(Gradients& g, double max_norm) {
  double sq = 0.0;
  for (const auto& block : parameter_blocks(std::as_const(g)))
    for (double v : block.values) sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) scale(g, max_norm / norm);
  return norm;
}

EvalResult evaluate(const LmModel& m, std::span<const Token> stream, int streams, Exec exec) {
  m.validate();
  if (stream.size() < 2) throw DataError("evaluation stream needs at least two tokens");
  if (streams < 1) throw DimensionError("evaluate: streams must be positive");
  for (Token t : stream)
    if (t < 0 || t >= m.vocab()) throw DataError("token index outside the vocabulary");
  const Index predictions = static_cast<Index>(stream.size()) - 1;
  const Index chunks = std::min<Index>(streams, predictions);
  std::vector<double> nll(static_cast<std::size_t>(chunks), 0.0);
  const Activation act = activation_of(m.cell);
  for_rows(chunks, exec, [&](Index c) {
    const Index begin = predictions * c / chunks;
    const Index end = predictions * (c + 1) / chunks;
    Vector h = initial_state(m.cell);
    double sum = 0.0;
    for (Index t = begin; t < end; ++t) {
      h = activate(act, preactivation(m.cell, h, stream[t]));
      const Vector logits = m.out_W * h + m.out_b;
      const double mx = logits.maxCoeff();
      sum += mx + std::log((logits.array() - mx).exp().sum()) - logits[stream[t + 1]];
    }
    nll[c] = sum;
  });
  double total = 0.0;
  for (double v : nll) total += v;
  EvalResult r;
  r.chars = predictions;
  r.nll = total / static_cast<double>(predictions);
  r.bpc = r.nll / std::numbers::ln2;
  if (!std::isfinite(r.nll)) throw NumericalError("evaluation loss is not finite");
  return r;
}

}  // namespace cprnn
