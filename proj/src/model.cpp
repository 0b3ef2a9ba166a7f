#include <cmath>

#include "cprnn/errors.hpp"
#include "cprnn/random.hpp"
#include "cprnn/training.hpp"

namespace cprnn {

namespace {

template <typename M>
auto span_of(M& m) {
  using T = std::remove_pointer_t<decltype(m.data())>;
  return std::span<T>(m.data(), static_cast<std::size_t>(m.size()));
}

// Visits (name, array) pairs of the trainable parameters in a fixed order.
template <typename Model, typename F>
void for_each_block(Model& m, F&& f) {
  std::visit(
      [&](auto& p) {
        using P = std::decay_t<decltype(p)>;
        f("h0", span_of(p.h0));
        if constexpr (std::is_same_v<P, SecondOrderParams>) {
          f("A", p.A.values());
        } else if constexpr (std::is_same_v<P, CpRnnParams>) {
          f("cp.A", span_of(p.cp.a()));
          f("cp.B", span_of(p.cp.b()));
          f("cp.C", span_of(p.cp.c()));
          if (p.bilinear_only) return;
        } else if constexpr (std::is_same_v<P, MiRnnParams>) {
          f("alpha", span_of(p.alpha));
          f("beta1", span_of(p.beta1));
          f("beta2", span_of(p.beta2));
        }
        f("U", span_of(p.U));
        f("V", span_of(p.V));
        f("b", span_of(p.b));
      },
      m.cell);
  f("out_W", span_of(m.out_W));
  f("out_b", span_of(m.out_b));
}

}  // namespace

void LmModel::validate() const {
  cprnn::validate(cell);
  if (out_W.cols() != hidden())
    throw DimensionError("readout has " + std::to_string(out_W.cols()) + " columns, expected " +
                         std::to_string(hidden()));
  if (out_b.size() != out_W.rows()) throw DimensionError("readout bias length differs from vocabulary size");
  if (input_size(cell) != out_W.rows())
    throw DimensionError("cell input size " + std::to_string(input_size(cell)) + " differs from vocabulary size " +
                         std::to_string(out_W.rows()));
}

std::vector<ParamBlock> parameter_blocks(LmModel& m) {
  std::vector<ParamBlock> out;
  for_each_block(m, [&](const char* name, std::span<double> v) { out.push_back({name, v}); });
  return out;
}

std::vector<ConstParamBlock> parameter_blocks(const LmModel& m) {
  std::vector<ConstParamBlock> out;
  for_each_block(m, [&](const char* name, std::span<const double> v) { out.push_back({name, v}); });
  return out;
}

LmModel zeros_like(const LmModel& m) {
  LmModel z = m;
  for (auto& block : parameter_blocks(z)) std::fill(block.values.begin(), block.values.end(), 0.0);
  return z;
}

Index count_parameters(const LmModel& m) {
  Index total = 0;
  for (const auto& block : parameter_blocks(m)) total += static_cast<Index>(block.values.size());
  return total;
}

Index closed_form_param_count(ModelKind kind, Index n, Index d, Index rank, Index vocab) {
  const Index head = vocab * n + vocab;
  const Index rnn = n * d + n * n + n + n;
  switch (kind) {
    case ModelKind::rnn: return rnn + head;
    case ModelKind::mirnn: return rnn + 3 * n + head;
    case ModelKind::second_order: return rnn + n * n * d + head;
    case ModelKind::cprnn: return rnn + rank * (2 * n + d) + head;
    case ModelKind::cpbirnn: return rank * (2 * n + d) + n + head;
  }
  return 0;
}

LmModel init_params(ModelKind kind, Index n, Index d, Index rank, Activation act, std::uint64_t seed) {
  if (n < 1 || d < 1) throw DimensionError("init_params: hidden and input sizes must be positive");
  if (rank < 0) throw DimensionError("init_params: CP rank must be non-negative");
  const double s = 1.0 / std::sqrt(static_cast<double>(n));
  LmModel m;
  m.cell = random_cell(kind, n, d, rank, act, seed, s);
  std::visit([](auto& p) { p.h0.setZero(); }, m.cell);
  auto rng = make_rng(seed, {0x68656164});
  m.out_W = random_uniform(d, n, -s, s, rng);
  m.out_b = random_uniform(d, -s, s, rng);
  return m;
}

}  // namespace cprnn
