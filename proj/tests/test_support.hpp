#pragma once

// Test-only generators and independent oracles. Nothing here calls the code
// paths it is used to check.

#include <sepdict/sepdict.hpp>

#include <Eigen/SVD>

#include <cmath>
#include <functional>
#include <random>

namespace sepdict::testing {

using Rng = std::mt19937_64;

inline Matrix gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

inline ObliquePoint random_point(Index rows, Index cols, Rng& rng) {
  return normalize_columns(gaussian(rows, cols, rng));
}

/// Random tangent at d, built by removing the normal component column by
/// column with an explicit dot product.
inline Matrix random_tangent(const ObliquePoint& d, Rng& rng) {
  Matrix q = gaussian(d.rows(), d.cols(), rng);
  for (Index j = 0; j < d.cols(); ++j) q.col(j) -= d.col(j).dot(q.col(j)) * d.col(j);
  return q;
}

inline ProductPoint random_product_point(Index a, Index b, Index m, Index h, Index w, Rng& rng) {
  return {MatrixStack(gaussian(a, b * m, rng), b), random_point(h, a, rng), random_point(w, b, rng)};
}

inline ProductTangent random_product_tangent(const ProductPoint& y, Rng& rng) {
  return {MatrixStack(gaussian(y.coeffs.rows(), y.coeffs.cols() * y.coeffs.count(), rng),
                      y.coeffs.cols()),
          random_tangent(y.dictA, rng), random_tangent(y.dictB, rng)};
}

/// Brute-force mutual coherence of an arbitrary matrix with unit columns.
inline double brute_mu(const Matrix& d) {
  double mu = 0.0;
  for (Index i = 0; i < d.cols(); ++i)
    for (Index j = i + 1; j < d.cols(); ++j) mu = std::max(mu, std::abs(d.col(i).dot(d.col(j))));
  return mu;
}

/// Explicit Kronecker product B kron A by definition (entry-wise).
inline Matrix brute_kron(const Matrix& b, const Matrix& a) {
  Matrix out(b.rows() * a.rows(), b.cols() * a.cols());
  for (Index bi = 0; bi < b.rows(); ++bi)
    for (Index bj = 0; bj < b.cols(); ++bj)
      for (Index ai = 0; ai < a.rows(); ++ai)
        for (Index aj = 0; aj < a.cols(); ++aj)
          out(bi * a.rows() + ai, bj * a.cols() + aj) = b(bi, bj) * a(ai, aj);
  return out;
}

/// Largest singular value from a dense SVD.
inline double svd_norm(const Matrix& m) {
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

/// Cost written directly from its definition with explicit loops, on ambient
/// matrices (no unit-norm requirement): x is a x (b m), a is h x a, b is w x b.
inline double reference_cost(const Matrix& x, const Matrix& a, const Matrix& b, const TrainingSet& s,
                             const ModelParams& p) {
  const Index m = s.count();
  const Index nb = b.cols();
  double fit = 0.0;
  double g = 0.0;
  for (Index j = 0; j < m; ++j) {
    const Matrix xj = x.middleCols(j * nb, nb);
    fit += (a * xj * b.transpose() - Matrix(s.slice(j))).squaredNorm();
    for (Index k = 0; k < xj.size(); ++k) g += std::log(1.0 + p.rho * xj.data()[k] * xj.data()[k]);
  }
  auto r = [](const Matrix& d) {
    double acc = 0.0;
    for (Index i = 0; i < d.cols(); ++i)
      for (Index k = i + 1; k < d.cols(); ++k) {
        const double c = d.col(i).dot(d.col(k));
        acc -= std::log(1.0 - c * c);
      }
    return acc;
  };
  const double md = static_cast<double>(m);
  return fit / (2.0 * md) + p.lambda / md * g + p.kappa * (r(a) + r(b));
}

inline double reference_cost(const ProductPoint& y, const TrainingSet& s, const ModelParams& p) {
  return reference_cost(y.coeffs.data(), y.dictA.matrix(), y.dictB.matrix(), s, p);
}

/// Central finite differences of a scalar function of a matrix.
inline Matrix finite_difference(const std::function<double(const Matrix&)>& f, const Matrix& at,
                                double step = 1e-6) {
  Matrix g(at.rows(), at.cols());
  Matrix probe = at;
  for (Index k = 0; k < at.size(); ++k) {
    const double orig = probe.data()[k];
    probe.data()[k] = orig + step;
    const double up = f(probe);
    probe.data()[k] = orig - step;
    const double down = f(probe);
    probe.data()[k] = orig;
    g.data()[k] = (up - down) / (2.0 * step);
  }
  return g;
}

/// Sparse a x b matrix with `nnz` distinct random positions and N(0,1)
/// values bounded away from zero.
inline Matrix sparse_coefficients(Index a, Index b, Index nnz, Rng& rng) {
  Matrix x = Matrix::Zero(a, b);
  std::uniform_int_distribution<Index> pos(0, a * b - 1);
  std::normal_distribution<double> val;
  Index placed = 0;
  while (placed < nnz) {
    const Index k = pos(rng);
    if (x.data()[k] != 0.0) continue;
    double v = val(rng);
    v += v >= 0 ? 0.5 : -0.5;
    x.data()[k] = v;
    ++placed;
  }
  return x;
}

/// Greedy sign/permutation matching: repeatedly pairs the planted and learned
/// atoms with the largest remaining |inner product| and returns the fraction
/// of planted atoms paired at >= threshold.
inline double matched_fraction(const Matrix& planted, const Matrix& learned, double threshold) {
  Matrix c = (planted.transpose() * learned).cwiseAbs();
  Index matched = 0;
  for (Index round = 0; round < std::min(planted.cols(), learned.cols()); ++round) {
    Index i = 0;
    Index j = 0;
    const double best = c.maxCoeff(&i, &j);
    if (best < threshold) break;
    ++matched;
    c.row(i).setConstant(-1.0);
    c.col(j).setConstant(-1.0);
  }
  return static_cast<double>(matched) / static_cast<double>(planted.cols());
}

}  // namespace sepdict::testing
