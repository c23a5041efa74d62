#pragma once

// Separable dictionary learning cost
//
//   f(X, A, B) = 1/(2m) sum_j ||A X_j B^T - S_j||_F^2 + (lambda/m) g(X)
//                + kappa r(A) + kappa r(B)
//
// with the log sparsity measure g and the log-barrier coherence r, plus the
// classical mutual coherence and closed-form gradients.

#include <sepdict/core.hpp>
#include <sepdict/manifold.hpp>

#include <algorithm>
#include <cmath>

namespace sepdict {

struct ModelParams {
  double rho = 100.0;
  double lambda = 0.1;
  double kappa = 0.1;

  void validate() const {
    require(rho > 0.0, "ModelParams: rho must be positive");
    require(lambda > 0.0, "ModelParams: lambda must be positive");
    require(kappa >= 0.0, "ModelParams: kappa must be nonnegative");
  }
};

/// m training samples of size h x w.
using TrainingSet = MatrixStack;

/// sum over all entries of ln(1 + rho x^2).
inline double sparsity_g(const CoefficientStack& x, double rho) {
  require(rho > 0.0, "sparsity_g: rho must be positive");
  return x.data().unaryExpr([rho](double v) { return std::log1p(rho * v * v); }).sum();
}

/// max_{i<j} |d_i^T d_j|.
inline double mutual_coherence_mu(const ObliquePoint& d) {
  require(d.cols() >= 2, "mutual_coherence_mu: need at least two columns");
  Matrix gram = d.matrix().transpose() * d.matrix();
  gram.diagonal().setZero();
  return std::min(1.0, gram.cwiseAbs().maxCoeff());
}

/// -sum_{i<j} ln(1 - (d_i^T d_j)^2) of an arbitrary matrix; +inf when two
/// columns are collinear. Zero for a single column (empty sum).
inline double coherence_r(const Matrix& d) {
  const Matrix gram = d.transpose() * d;
  double sum = 0.0;
  for (Index j = 1; j < gram.cols(); ++j) {
    for (Index i = 0; i < j; ++i) {
      const double c = gram(i, j);
      const double gap = 1.0 - c * c;
      if (!(gap > 0.0)) return kInf;
      sum -= std::log(gap);
    }
  }
  return sum;
}

inline double coherence_r(const ObliquePoint& d) { return coherence_r(d.matrix()); }

/// mu(B kron A) = max{mu(A), mu(B)} for unit-column factors. A factor with a
/// single column contributes nothing.
inline double kron_coherence(const ObliquePoint& a, const ObliquePoint& b) {
  require(a.cols() * b.cols() >= 2, "kron_coherence: product needs two columns");
  double mu = 0.0;
  if (a.cols() >= 2) mu = std::max(mu, mutual_coherence_mu(a));
  if (b.cols() >= 2) mu = std::max(mu, mutual_coherence_mu(b));
  return mu;
}

namespace detail {

inline void check_dims(const ProductPoint& y, const TrainingSet& s) {
  y.check_consistent();
  require(s.count() >= 1, "TrainingSet: need at least one sample");
  if (s.rows() != y.dictA.rows() || s.cols() != y.dictB.rows() ||
      s.count() != y.coeffs.count()) {
    throw Error("dimension mismatch between training set and iterate");
  }
}

/// Residuals R_j = A X_j B^T - S_j stacked as h x (w m), plus A X_j stacked
/// as h x (b m).
struct Residuals {
  MatrixStack ax;
  MatrixStack r;
};

inline Residuals residuals(const CoefficientStack& x, const Matrix& a, const Matrix& b,
                           const TrainingSet& s) {
  Residuals out{MatrixStack(a * x.data(), x.cols()), MatrixStack(s.rows(), s.cols(), s.count())};
  for (Index j = 0; j < s.count(); ++j) {
    out.r.slice(j).noalias() = out.ax.slice(j) * b.transpose();
  }
  out.r.data() -= s.data();
  return out;
}

inline Residuals residuals(const ProductPoint& y, const TrainingSet& s) {
  return residuals(y.coeffs, y.dictA.matrix(), y.dictB.matrix(), s);
}

/// d r / d D = D W with W_ij = 2 c_ij / (1 - c_ij^2) off the diagonal.
inline Matrix coherence_gradient(const ObliquePoint& d) {
  constexpr double eps = 1e-12;
  Matrix w = d.matrix().transpose() * d.matrix();
  for (Index j = 0; j < w.cols(); ++j) {
    for (Index i = 0; i < w.rows(); ++i) {
      if (i == j) {
        w(i, j) = 0.0;
        continue;
      }
      const double c = w(i, j);
      if (!(std::abs(c) < 1.0)) throw NumericalError("coherence barrier hit");
      const double cc = std::clamp(c, -1.0 + eps, 1.0 - eps);
      w(i, j) = 2.0 * cc / (1.0 - cc * cc);
    }
  }
  return d.matrix() * w;
}

}  // namespace detail

/// The cost evaluated at arbitrary factors, without the unit-column
/// constraint. Useful for finite-difference checks in the ambient space.
inline double cost_f_ambient(const CoefficientStack& x, const Matrix& a, const Matrix& b,
                             const TrainingSet& s, const ModelParams& p) {
  require(s.count() >= 1, "TrainingSet: need at least one sample");
  if (s.rows() != a.rows() || s.cols() != b.rows() || s.count() != x.count() ||
      x.rows() != a.cols() || x.cols() != b.cols()) {
    throw Error("dimension mismatch between training set and iterate");
  }
  const double m = static_cast<double>(s.count());
  const auto res = detail::residuals(x, a, b, s);
  double f = 0.5 / m * res.r.data().squaredNorm();
  f += p.lambda / m * sparsity_g(x, p.rho);
  if (p.kappa > 0.0) f += p.kappa * (coherence_r(a) + coherence_r(b));
  return f;
}

inline double cost_f(const ProductPoint& y, const TrainingSet& s, const ModelParams& p) {
  detail::check_dims(y, s);
  return cost_f_ambient(y.coeffs, y.dictA.matrix(), y.dictB.matrix(), s, p);
}

/// Ambient gradient of cost_f, laid out like a ProductTangent.
inline ProductTangent euclidean_gradient_f(const ProductPoint& y,
                                           const TrainingSet& s,
                                           const ModelParams& p) {
  detail::check_dims(y, s);
  const Matrix& a = y.dictA.matrix();
  const Matrix& b = y.dictB.matrix();
  const Index count = s.count();
  const double inv_m = 1.0 / static_cast<double>(count);
  const auto res = detail::residuals(y, s);

  // R_j B for every j, stacked h x (b m).
  MatrixStack rb(a.rows(), b.cols(), count);
  Matrix grad_b = Matrix::Zero(b.rows(), b.cols());
  for (Index j = 0; j < count; ++j) {
    rb.slice(j).noalias() = res.r.slice(j) * b;
    grad_b.noalias() += res.r.slice(j).transpose() * res.ax.slice(j);
  }

  ProductTangent g;
  g.coeffs = MatrixStack(a.transpose() * rb.data(), b.cols());
  g.coeffs.data() *= inv_m;
  const double rho = p.rho;
  g.coeffs.data() += (p.lambda * inv_m) *
                     y.coeffs.data().unaryExpr([rho](double v) {
                       return 2.0 * rho * v / (1.0 + rho * v * v);
                     });

  g.dirA.noalias() = inv_m * (rb.data() * y.coeffs.data().transpose());
  g.dirB = inv_m * grad_b;
  if (p.kappa > 0.0) {
    g.dirA += p.kappa * detail::coherence_gradient(y.dictA);
    g.dirB += p.kappa * detail::coherence_gradient(y.dictB);
  }
  return g;
}

inline ProductTangent riemannian_gradient(const ProductPoint& y,
                                          const TrainingSet& s,
                                          const ModelParams& p) {
  return project_tangent_product(y, euclidean_gradient_f(y, s, p));
}

}  // namespace sepdict
