#pragma once

// Dense order-3 tensors and the handful of multilinear products the
// recurrent models are built from.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cprnn {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Dims3 {
  Index d1 = 0;
  Index d2 = 0;
  Index d3 = 0;

  Index operator[](int axis) const { return axis == 0 ? d1 : axis == 1 ? d2 : d3; }
  Index volume() const { return d1 * d2 * d3; }
  friend bool operator==(const Dims3&, const Dims3&) = default;
};

std::string to_string(const Dims3& dims);

/// Real d1 x d2 x d3 tensor stored row-major in (i, j, k), k fastest.
class Tensor3 {
 public:
  Tensor3() = default;
  /// Zero tensor.
  explicit Tensor3(Dims3 dims);
  Tensor3(Dims3 dims, std::vector<double> data);

  const Dims3& dims() const { return dims_; }
  Index size() const { return dims_.volume(); }

  double& operator()(Index i, Index j, Index k) { return data_[offset(i, j, k)]; }
  double operator()(Index i, Index j, Index k) const { return data_[offset(i, j, k)]; }

  /// Contiguous mode-3 fiber T(i, j, :).
  std::span<double> fiber(Index i, Index j) { return {data_.data() + offset(i, j, 0), static_cast<std::size_t>(dims_.d3)}; }
  std::span<const double> fiber(Index i, Index j) const {
    return {data_.data() + offset(i, j, 0), static_cast<std::size_t>(dims_.d3)};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool all_finite() const;
  double frobenius_norm() const;
  double max_abs() const;

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t offset(Index i, Index j, Index k) const {
    return static_cast<std::size_t>((i * dims_.d2 + j) * dims_.d3 + k);
  }

  Dims3 dims_{};
  std::vector<double> data_;
};

/// T x_mode v: contracts axis `mode` (1, 2 or 3) with v. The result keeps
/// the two remaining axes in their original order.
Matrix mode_product(const Tensor3& t, const Vector& v, int mode);

/// T x_1 h x_2 x, a vector of length d3.
Vector bilinear_contract(const Tensor3& t, const Vector& h, const Vector& x);

Vector hadamard(const Vector& u, const Vector& v);

/// Rank-one tensor a o b o c.
Tensor3 outer3(const Vector& a, const Vector& b, const Vector& c);

/// Mode-n unfolding with the first remaining index varying fastest along
/// columns: T_(1)[i, j + k d2], T_(2)[j, i + k d1], T_(3)[k, i + j d1].
Matrix unfold(const Tensor3& t, int mode);
Tensor3 fold(const Matrix& m, int mode, Dims3 dims);

double max_abs_diff(const Tensor3& a, const Tensor3& b);

}  // namespace cprnn
