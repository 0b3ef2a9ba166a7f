#pragma once

// Parameter records and forward steps for the recurrent families:
//   RNN      h' = s(V h + U x + b)
//   2RNN     h' = s(A x1 h x2 x + V h + U x + b)
//   CPRNN    h' = s([[A,B,C]] x1 h x2 x + V h + U x + b)   (CPBIRNN: U = V = b = 0)
//   MIRNN    h' = s(alpha .* Vh .* Ux + beta1 .* Vh + beta2 .* Ux + b)

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cprnn/cp.hpp"
#include "cprnn/tensor.hpp"

namespace cprnn {

enum class Activation { linear, tanh, relu };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

Vector activate(Activation act, const Vector& pre);
/// d s(a) / d a evaluated element-wise, given both a and s(a).
Vector activation_derivative(Activation act, const Vector& pre, const Vector& post);

struct RnnParams {
  Vector h0;
  Matrix U;  // n x d
  Matrix V;  // n x n
  Vector b;
  Activation act = Activation::tanh;

  Index hidden_size() const { return V.rows(); }
  Index input_size() const { return U.cols(); }
  void validate() const;
};

struct SecondOrderParams {
  Vector h0;
  Tensor3 A;  // n x d x n
  Matrix U;
  Matrix V;
  Vector b;
  Activation act = Activation::tanh;

  Index hidden_size() const { return V.rows(); }
  Index input_size() const { return U.cols(); }
  void validate() const;
};

struct CpRnnParams {
  Vector h0;
  CpFactors cp;  // dims (n, d, n)
  Matrix U;
  Matrix V;
  Vector b;
  Activation act = Activation::tanh;
  /// CPBIRNN: first-order terms and bias are held at zero.
  bool bilinear_only = false;

  Index hidden_size() const { return V.rows(); }
  Index input_size() const { return U.cols(); }
  Index rank() const { return cp.rank(); }
  void validate() const;
};

/// The bias b appears in the update rule, so it is carried even though the
/// usual parameter tuple for this family lists only h0, gates, U, V.
struct MiRnnParams {
  Vector h0;
  Vector alpha;
  Vector beta1;  // gates V h
  Vector beta2;  // gates U x
  Matrix U;
  Matrix V;
  Vector b;
  Activation act = Activation::tanh;

  Index hidden_size() const { return V.rows(); }
  Index input_size() const { return U.cols(); }
  void validate() const;
};

using CellParams = std::variant<RnnParams, SecondOrderParams, CpRnnParams, MiRnnParams>;

enum class ModelKind { rnn, second_order, cprnn, cpbirnn, mirnn };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
ModelKind kind_of(const CellParams& cell);

Index hidden_size(const CellParams& cell);
Index input_size(const CellParams& cell);
const Vector& initial_state(const CellParams& cell);
Activation activation_of(const CellParams& cell);
void validate(const CellParams& cell);

/// Every parameter (h0 included) drawn i.i.d. uniform on [-scale, scale];
/// first-order terms of a CPBIRNN stay zero. `rank` is ignored by families
/// without CP factors. h0, U, V, b are drawn first from a stream that does
/// not depend on `kind`, so they agree across families for the same seed.
CellParams random_cell(ModelKind kind, Index n, Index d, Index rank, Activation act, std::uint64_t seed,
                       double scale = 1.0);

struct Step {
  Vector pre;
  Vector h;
};

Step rnn_step(const RnnParams& p, const Vector& h, const Vector& x);
Step second_order_step(const SecondOrderParams& p, const Vector& h, const Vector& x);
Step cprnn_step(const CpRnnParams& p, const Vector& h, const Vector& x);
Step mirnn_step(const MiRnnParams& p, const Vector& h, const Vector& x);
Step step(const CellParams& cell, const Vector& h, const Vector& x);

struct Trajectory {
  std::vector<Vector> pres;
  std::vector<Vector> hiddens;
};

/// Iterates the cell from its h0 over `inputs`.
Trajectory run_sequence(const CellParams& cell, std::span<const Vector> inputs);

}  // namespace cprnn
