#include "cprnn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "cprnn/errors.hpp"

namespace cprnn {

namespace {

void require_mode(int mode) {
  if (mode < 1 || mode > 3) throw DimensionError("mode must be 1, 2 or 3, got " + std::to_string(mode));
}

void require_length(const Vector& v, Index expected, const char* what) {
  if (v.size() != expected)
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(expected) + ", got " +
                         std::to_string(v.size()));
}

}  // namespace

std::string to_string(const Dims3& dims) {
  return std::to_string(dims.d1) + "x" + std::to_string(dims.d2) + "x" + std::to_string(dims.d3);
}

Tensor3::Tensor3(Dims3 dims) : dims_(dims) {
  if (dims.d1 < 0 || dims.d2 < 0 || dims.d3 < 0) throw DimensionError("negative tensor dimension");
  data_.assign(static_cast<std::size_t>(dims.volume()), 0.0);
}

Tensor3::Tensor3(Dims3 dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
  if (dims.d1 < 0 || dims.d2 < 0 || dims.d3 < 0) throw DimensionError("negative tensor dimension");
  if (static_cast<Index>(data_.size()) != dims.volume())
    throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match dims " +
                         to_string(dims));
  if (!all_finite()) throw NumericalError("tensor data contains non-finite entries");
}

bool Tensor3::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

double Tensor3::frobenius_norm() const {
  double s = 0.0;
  for (double x : data_) s += x * x;
  return std::sqrt(s);
}

double Tensor3::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::abs(x));
  return m;
}

Matrix mode_product(const Tensor3& t, const Vector& v, int mode) {
  require_mode(mode);
  const auto [d1, d2, d3] = t.dims();
  require_length(v, t.dims()[mode - 1], "mode_product");
  Matrix out;
  switch (mode) {
    case 1:
      out = Matrix::Zero(d2, d3);
      for (Index i = 0; i < d1; ++i)
        for (Index j = 0; j < d2; ++j)
          for (Index k = 0; k < d3; ++k) out(j, k) += t(i, j, k) * v[i];
      break;
    case 2:
      out = Matrix::Zero(d1, d3);
      for (Index i = 0; i < d1; ++i)
        for (Index j = 0; j < d2; ++j)
          for (Index k = 0; k < d3; ++k) out(i, k) += t(i, j, k) * v[j];
      break;
    default:
      out = Matrix::Zero(d1, d2);
      for (Index i = 0; i < d1; ++i)
        for (Index j = 0; j < d2; ++j)
          for (Index k = 0; k < d3; ++k) out(i, j) += t(i, j, k) * v[k];
      break;
  }
  return out;
}

Vector bilinear_contract(const Tensor3& t, const Vector& h, const Vector& x) {
  require_length(h, t.dims().d1, "bilinear_contract (h)");
  require_length(x, t.dims().d2, "bilinear_contract (x)");
  const auto [d1, d2, d3] = t.dims();
  Vector out = Vector::Zero(d3);
  for (Index i = 0; i < d1; ++i) {
    if (h[i] == 0.0) continue;
    for (Index j = 0; j < d2; ++j) {
      const double w = h[i] * x[j];
      if (w == 0.0) continue;
      auto f = t.fiber(i, j);
      for (Index k = 0; k < d3; ++k) out[k] += w * f[k];
    }
  }
  return out;
}

Vector hadamard(const Vector& u, const Vector& v) {
  require_length(v, u.size(), "hadamard");
  return u.cwiseProduct(v);
}

Tensor3 outer3(const Vector& a, const Vector& b, const Vector& c) {
  Tensor3 t({a.size(), b.size(), c.size()});
  for (Index i = 0; i < a.size(); ++i)
    for (Index j = 0; j < b.size(); ++j)
      for (Index k = 0; k < c.size(); ++k) t(i, j, k) = a[i] * b[j] * c[k];
  return t;
}

Matrix unfold(const Tensor3& t, int mode) {
  require_mode(mode);
  const auto [d1, d2, d3] = t.dims();
  Matrix m;
  switch (mode) {
    case 1:
      m.resize(d1, d2 * d3);
      for (Index i = 0; i < d1; ++i)
        for (Index j = 0; j < d2; ++j)
          for (Index k = 0; k < d3; ++k) m(i, j + k * d2) = t(i, j, k);
      break;
    case 2:
      m.resize(d2, d1 * d3);
      for (Index i = 0; i < d1; ++i)
        for (Index j = 0; j < d2; ++j)
          for (Index k = 0; k < d3; ++k) m(j, i + k * d1) = t(i, j, k);
      break;
    default:
      m.resize(d3, d1 * d2);
      for (Index i = 0; i < d1; ++i)
        for (Index j = 0; j < d2; ++j)
          for (Index k = 0; k < d3; ++k) m(k, i + j * d1) = t(i, j, k);
      break;
  }
  return m;
}

Tensor3 fold(const Matrix& m, int mode, Dims3 dims) {
  require_mode(mode);
  const auto [d1, d2, d3] = dims;
  const Index rows = dims[mode - 1];
  if (m.rows() != rows || m.cols() * rows != dims.volume())
    throw DimensionError("fold: matrix shape does not match dims " + to_string(dims));
  Tensor3 t(dims);
  for (Index i = 0; i < d1; ++i)
    for (Index j = 0; j < d2; ++j)
      for (Index k = 0; k < d3; ++k) {
        switch (mode) {
          case 1: t(i, j, k) = m(i, j + k * d2); break;
          case 2: t(i, j, k) = m(j, i + k * d1); break;
          default: t(i, j, k) = m(k, i + j * d1); break;
        }
      }
  return t;
}

double max_abs_diff(const Tensor3& a, const Tensor3& b) {
  if (a.dims() != b.dims()) throw DimensionError("max_abs_diff: dims differ");
  double m = 0.0;
  auto va = a.values();
  auto vb = b.values();
  for (std::size_t n = 0; n < va.size(); ++n) m = std::max(m, std::abs(va[n] - vb[n]));
  return m;
}

}  // namespace cprnn
