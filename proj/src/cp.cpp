#include "cprnn/cp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "cprnn/errors.hpp"
#include "cprnn/random.hpp"

namespace cprnn {

CpFactors::CpFactors(Dims3 dims) : a_(dims.d1, 0), b_(dims.d2, 0), c_(dims.d3, 0) {}

CpFactors::CpFactors(Matrix a, Matrix b, Matrix c) : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  validate();
}

void CpFactors::validate() const {
  if (a_.cols() != b_.cols() || a_.cols() != c_.cols())
    throw DimensionError("CP factors disagree on rank: " + std::to_string(a_.cols()) + ", " +
                         std::to_string(b_.cols()) + ", " + std::to_string(c_.cols()));
}

Tensor3 reconstruct(const CpFactors& f) {
  f.validate();
  const Dims3 dims = f.dims();
  Tensor3 t(dims);
  const Matrix& a = f.a();
  const Matrix& b = f.b();
  const Matrix& c = f.c();
  Vector w(f.rank());
  for (Index i = 0; i < dims.d1; ++i)
    for (Index j = 0; j < dims.d2; ++j) {
      w = a.row(i).cwiseProduct(b.row(j)).transpose();
      auto fib = t.fiber(i, j);
      for (Index k = 0; k < dims.d3; ++k) fib[k] = c.row(k).dot(w);
    }
  return t;
}

Vector factored_contract(const CpFactors& f, const Vector& h, const Vector& x) {
  f.validate();
  if (h.size() != f.a().rows() || x.size() != f.b().rows())
    throw DimensionError("factored_contract: vector lengths do not match factor rows");
  if (f.rank() == 0) return Vector::Zero(f.c().rows());
  return f.c() * (f.a().transpose() * h).cwiseProduct(f.b().transpose() * x);
}

CpFactors pad_with_zero_column(const CpFactors& f) {
  auto pad = [](const Matrix& m) {
    Matrix out = Matrix::Zero(m.rows(), m.cols() + 1);
    out.leftCols(m.cols()) = m;
    return out;
  };
  return CpFactors(pad(f.a()), pad(f.b()), pad(f.c()));
}

namespace {

using ConstFiber = Eigen::Map<const Vector>;

// Matricized-tensor times Khatri-Rao product for the factor of `mode`,
// computed fiber by fiber so no unfolding is materialised.
Matrix mttkrp(const Tensor3& t, const Matrix& a, const Matrix& b, const Matrix& c, int mode) {
  const auto [d1, d2, d3] = t.dims();
  const Index rank = a.cols();
  Matrix out = Matrix::Zero(t.dims()[mode - 1], rank);
  Vector tmp(rank);
  for (Index i = 0; i < d1; ++i)
    for (Index j = 0; j < d2; ++j) {
      ConstFiber fib(t.fiber(i, j).data(), d3);
      switch (mode) {
        case 1:
          tmp.noalias() = c.transpose() * fib;
          out.row(i) += b.row(j).cwiseProduct(tmp.transpose());
          break;
        case 2:
          tmp.noalias() = c.transpose() * fib;
          out.row(j) += a.row(i).cwiseProduct(tmp.transpose());
          break;
        default:
          out.noalias() += fib * a.row(i).cwiseProduct(b.row(j));
          break;
      }
    }
  return out;
}

Matrix solve_factor(const Matrix& mttkrp_result, const Matrix& g1, const Matrix& g2, double ridge) {
  Matrix gram = (g1.transpose() * g1).cwiseProduct(g2.transpose() * g2);
  gram.diagonal().array() += ridge;
  return gram.ldlt().solve(mttkrp_result.transpose()).transpose();
}

// Spreads each rank-one term's scale evenly over its three vectors.
void balance_columns(Matrix& a, Matrix& b, Matrix& c) {
  for (Index r = 0; r < a.cols(); ++r) {
    const double na = a.col(r).norm();
    const double nb = b.col(r).norm();
    const double nc = c.col(r).norm();
    if (na == 0.0 || nb == 0.0 || nc == 0.0) continue;
    const double g = std::cbrt(na * nb * nc);
    a.col(r) *= g / na;
    b.col(r) *= g / nb;
    c.col(r) *= g / nc;
  }
}

double relative_misfit(const Tensor3& t, const CpFactors& f, double t_norm) {
  const Tensor3 approx = reconstruct(f);
  double s = 0.0;
  auto vt = t.values();
  auto va = approx.values();
  for (std::size_t n = 0; n < vt.size(); ++n) {
    const double d = vt[n] - va[n];
    s += d * d;
  }
  return std::sqrt(s) / t_norm;
}

AlsResult run_als(const Tensor3& t, CpFactors start, const AlsConfig& config, double t_norm) {
  Matrix a = std::move(start.a());
  Matrix b = std::move(start.b());
  Matrix c = std::move(start.c());
  AlsResult result;
  double misfit = relative_misfit(t, CpFactors(a, b, c), t_norm);
  result.misfit_history.push_back(misfit);
  int it = 0;
  for (; it < config.max_iters; ++it) {
    const Matrix a_prev = a;
    const Matrix b_prev = b;
    const Matrix c_prev = c;
    a = solve_factor(mttkrp(t, a, b, c, 1), b, c, config.ridge);
    b = solve_factor(mttkrp(t, a, b, c, 2), a, c, config.ridge);
    c = solve_factor(mttkrp(t, a, b, c, 3), a, b, config.ridge);
    balance_columns(a, b, c);
    double next = relative_misfit(t, CpFactors(a, b, c), t_norm);
    // Extrapolate along the last sweep; kept only when it lowers the misfit.
    if (it > 0 && std::isfinite(next)) {
      const double step = std::cbrt(static_cast<double>(it + 1));
      Matrix ea = a + step * (a - a_prev);
      Matrix eb = b + step * (b - b_prev);
      Matrix ec = c + step * (c - c_prev);
      const double extrapolated = relative_misfit(t, CpFactors(ea, eb, ec), t_norm);
      if (extrapolated < next) {
        a = std::move(ea);
        b = std::move(eb);
        c = std::move(ec);
        next = extrapolated;
      }
    }
    if (!std::isfinite(next)) throw NumericalError("ALS produced a non-finite misfit");
    result.misfit_history.push_back(next);
    const double change = std::abs(misfit - next);
    misfit = next;
    if (change < config.tol || misfit < 1e-15) {
      ++it;
      break;
    }
  }
  result.factors = CpFactors(std::move(a), std::move(b), std::move(c));
  result.fit = 1.0 - misfit;
  result.iterations = it;
  return result;
}

// For T = [[A,B,C]] with d1, d2 >= R, the mixtures T_w = A diag(C^T w) B^T
// of two slice combinations form a pencil whose eigenvectors recover A.
std::optional<CpFactors> gevd_start(const Tensor3& t, Index rank, std::uint64_t seed, double ridge) {
  const auto [d1, d2, d3] = t.dims();
  if (d1 < rank || d2 < rank || d3 < 2) return std::nullopt;
  auto rng = make_rng(seed, {0x67657664, static_cast<std::uint64_t>(rank)});
  const Vector w1 = random_uniform(d3, -1.0, 1.0, rng);
  const Vector w2 = random_uniform(d3, -1.0, 1.0, rng);
  Matrix t1 = Matrix::Zero(d1, d2);
  Matrix t2 = Matrix::Zero(d1, d2);
  for (Index i = 0; i < d1; ++i)
    for (Index j = 0; j < d2; ++j)
      for (Index k = 0; k < d3; ++k) {
        t1(i, j) += w1[k] * t(i, j, k);
        t2(i, j) += w2[k] * t(i, j, k);
      }
  Matrix stacked_cols(d1, 2 * d2);
  stacked_cols << t1, t2;
  Matrix stacked_rows(2 * d1, d2);
  stacked_rows << t1, t2;
  const Matrix u = Eigen::JacobiSVD<Matrix>(stacked_cols, Eigen::ComputeThinU).matrixU().leftCols(rank);
  const Matrix v = Eigen::JacobiSVD<Matrix>(stacked_rows, Eigen::ComputeThinV).matrixV().leftCols(rank);
  const Matrix p1 = u.transpose() * t1 * v;
  const Matrix p2 = u.transpose() * t2 * v;
  Eigen::FullPivLU<Matrix> p1_lu(p1);
  if (!p1_lu.isInvertible()) return std::nullopt;
  Eigen::EigenSolver<Matrix> eig(p2 * p1_lu.inverse());
  if (eig.info() != Eigen::Success) return std::nullopt;
  const auto vals = eig.eigenvalues();
  const auto vecs = eig.eigenvectors();
  // A conjugate pair spans the same real plane as its real and imaginary parts.
  Matrix e(rank, rank);
  for (Index r = 0; r < rank; ++r) {
    if (vals[r].imag() != 0.0 && r + 1 < rank) {
      e.col(r) = vecs.col(r).real();
      e.col(r + 1) = vecs.col(r).imag();
      ++r;
    } else {
      e.col(r) = vecs.col(r).real();
    }
  }
  Eigen::FullPivLU<Matrix> e_lu(e);
  if (!e_lu.isInvertible()) return std::nullopt;
  Matrix a = u * e;
  Matrix b = v * (e_lu.inverse() * p1).transpose();
  Matrix c = solve_factor(mttkrp(t, a, b, Matrix::Zero(d3, rank), 3), a, b, ridge);
  if (!a.allFinite() || !b.allFinite() || !c.allFinite()) return std::nullopt;
  balance_columns(a, b, c);
  return CpFactors(std::move(a), std::move(b), std::move(c));
}

}  // namespace

AlsResult als_fit(const Tensor3& t, Index rank, const AlsConfig& config, Exec exec, const CpFactors* warm_start) {
  if (rank < 1) throw DimensionError("als_fit: rank must be at least 1");
  if (config.restarts < 0 || config.max_iters < 0) throw DimensionError("als_fit: negative iteration budget");
  const Dims3 dims = t.dims();
  const double t_norm = t.frobenius_norm();
  if (t_norm == 0.0) {
    AlsResult zero;
    zero.factors = CpFactors(Matrix::Zero(dims.d1, rank), Matrix::Zero(dims.d2, rank), Matrix::Zero(dims.d3, rank));
    zero.fit = 1.0;
    zero.misfit_history = {0.0};
    return zero;
  }
  if (warm_start && (warm_start->dims() != dims || warm_start->rank() != rank))
    throw DimensionError("als_fit: warm start does not match tensor dims and rank");

  // Fitting the unit-norm tensor keeps the ridge relative to the data scale.
  Tensor3 unit = t;
  for (double& v : unit.values()) v /= t_norm;

  const int offset = warm_start ? 1 : 0;
  const std::optional<CpFactors> algebraic =
      config.algebraic_start ? gevd_start(unit, rank, config.seed, config.ridge) : std::nullopt;
  const int random_end = config.restarts + offset;
  const int starts = random_end + (algebraic ? 1 : 0);
  if (starts == 0) throw DimensionError("als_fit: no starting points");

  auto initial = [&](int s) {
    if (s < offset) return CpFactors(warm_start->a() / t_norm, warm_start->b(), warm_start->c());
    if (s >= random_end) return *algebraic;
    auto rng = make_rng(config.seed, {static_cast<std::uint64_t>(rank), static_cast<std::uint64_t>(s - offset)});
    Matrix a = random_uniform(dims.d1, rank, -1.0, 1.0, rng);
    Matrix b = random_uniform(dims.d2, rank, -1.0, 1.0, rng);
    Matrix c = random_uniform(dims.d3, rank, -1.0, 1.0, rng);
    return CpFactors(std::move(a), std::move(b), std::move(c));
  };

  std::vector<AlsResult> results(static_cast<std::size_t>(starts));
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int s = 0; s < starts; ++s) results[s] = run_als(unit, initial(s), config, 1.0);
  } else {
    for (int s = 0; s < starts; ++s) results[s] = run_als(unit, initial(s), config, 1.0);
  }

  int best = 0;
  for (int s = 1; s < starts; ++s)
    if (results[s].fit > results[best].fit) best = s;
  AlsResult out = std::move(results[best]);
  out.best_restart = best;
  Matrix a = out.factors.a() * t_norm;
  Matrix b = out.factors.b();
  Matrix c = out.factors.c();
  balance_columns(a, b, c);
  out.factors = CpFactors(std::move(a), std::move(b), std::move(c));
  return out;
}

CpFactors exact_slice_decomposition(const Tensor3& t) {
  const auto [d1, d2, d3] = t.dims();
  const Index p12 = d1 * d2;
  const Index p13 = d1 * d3;
  const Index p23 = d2 * d3;
  const Index rank = std::min({p12, p13, p23});
  Matrix a = Matrix::Zero(d1, rank);
  Matrix b = Matrix::Zero(d2, rank);
  Matrix c = Matrix::Zero(d3, rank);
  Index r = 0;
  if (p12 == rank) {
    for (Index i = 0; i < d1; ++i)
      for (Index j = 0; j < d2; ++j, ++r) {
        a(i, r) = 1.0;
        b(j, r) = 1.0;
        for (Index k = 0; k < d3; ++k) c(k, r) = t(i, j, k);
      }
  } else if (p13 == rank) {
    for (Index i = 0; i < d1; ++i)
      for (Index k = 0; k < d3; ++k, ++r) {
        a(i, r) = 1.0;
        c(k, r) = 1.0;
        for (Index j = 0; j < d2; ++j) b(j, r) = t(i, j, k);
      }
  } else {
    for (Index j = 0; j < d2; ++j)
      for (Index k = 0; k < d3; ++k, ++r) {
        b(j, r) = 1.0;
        c(k, r) = 1.0;
        for (Index i = 0; i < d1; ++i) a(i, r) = t(i, j, k);
      }
  }
  return CpFactors(std::move(a), std::move(b), std::move(c));
}

RankReport estimate_cp_rank(const Tensor3& t, int max_rank, const AlsConfig& config, double tolerance, Exec exec) {
  if (max_rank < 1) throw DimensionError("estimate_cp_rank: max_rank must be at least 1");
  RankReport report;
  report.tolerance = tolerance;
  report.restarts_used = config.restarts;
  if (t.frobenius_norm() == 0.0) {
    report.estimated_rank = 0;
    report.fits = {{1, 1.0}};
    return report;
  }

  const Dims3 dims = t.dims();
  std::optional<CpFactors> previous;
  int found = 0;
  for (int r = 1; r <= max_rank; ++r) {
    std::optional<CpFactors> warm;
    if (previous) {
      auto rng = make_rng(config.seed, {0x5741524dULL, static_cast<std::uint64_t>(r)});
      CpFactors padded = pad_with_zero_column(*previous);
      padded.a().col(r - 1) = random_uniform(dims.d1, -1e-4, 1e-4, rng);
      padded.b().col(r - 1) = random_uniform(dims.d2, -1e-4, 1e-4, rng);
      padded.c().col(r - 1) = random_uniform(dims.d3, -1e-4, 1e-4, rng);
      warm = std::move(padded);
    }
    AlsResult fit = als_fit(t, r, config, exec, warm ? &*warm : nullptr);
    report.fits.emplace_back(r, fit.fit);
    if (found == 0 && fit.fit >= 1.0 - tolerance) found = r;
    previous = std::move(fit.factors);
  }
  report.converged = found != 0;
  report.estimated_rank = found != 0 ? found : max_rank;
  return report;
}

Index max_rank_upper_bound(Index d1, Index d2, Index d3) {
  if (d1 < 1 || d2 < 1 || d3 < 1) throw DimensionError("max_rank_upper_bound: dims must be positive");
  return std::min({d1 * d2, d1 * d3, d2 * d3});
}

double typical_rank_lower_bound(Index n, Index d) {
  if (n < 1 || d < 1) throw DimensionError("typical_rank_lower_bound: dims must be positive");
  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  return nn * nn * dd / (2.0 * nn + dd - 2.0);
}

}  // namespace cprnn
