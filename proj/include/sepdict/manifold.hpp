#pragma once

// Geometry of the oblique manifold OB(n,d) = {D : ddiag(D^T D) = I} and of
// the product M = R^{a x b x m} x OB(h,a) x OB(w,b) used for dictionary
// learning: tangent projections, metric, geodesics and parallel transport.

#include <sepdict/core.hpp>

#include <cmath>
#include <string>

// Tangency / unit-norm preconditions are checked only when this is set
// (test builds); shape checks are always on.
#ifndef SEPDICT_CHECK_PRECONDITIONS
#define SEPDICT_CHECK_PRECONDITIONS 0
#endif

namespace sepdict {

namespace detail {
inline constexpr double kUnitNormTol = 1e-12;
inline constexpr double kTangentTol = 1e-9;
}  // namespace detail

/// Rescales any column whose norm deviates from 1 by more than 1e-12.
/// Columns already within tolerance are left bit-identical.
inline void renormalize_drift(Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j) {
    const double n = m.col(j).norm();
    if (std::abs(n - 1.0) > detail::kUnitNormTol) m.col(j) /= n;
  }
}

/// A point of OB(n,d): an n x d matrix with unit-norm columns.
class ObliquePoint {
 public:
  ObliquePoint() = default;

  /// Adopts `m` as a point; every column must have norm 1 within `tol`.
  /// Columns off by more than 1e-12 are renormalized.
  static ObliquePoint from_unit_columns(Matrix m, double tol = 1e-9) {
    require(m.rows() >= 1 && m.cols() >= 1, "ObliquePoint: empty matrix");
    for (Index j = 0; j < m.cols(); ++j) {
      const double n = m.col(j).norm();
      if (!(std::abs(n - 1.0) <= tol)) {
        throw Error("ObliquePoint: column " + std::to_string(j) +
                    " has norm " + std::to_string(n));
      }
    }
    renormalize_drift(m);
    return ObliquePoint(std::move(m));
  }

  const Matrix& matrix() const { return data_; }
  Index rows() const { return data_.rows(); }
  Index cols() const { return data_.cols(); }
  auto col(Index j) const { return data_.col(j); }

 private:
  explicit ObliquePoint(Matrix m) : data_(std::move(m)) {}
  friend ObliquePoint normalize_columns(const Matrix& m);
  friend ObliquePoint oblique_geodesic(const ObliquePoint&, const Matrix&,
                                       double);

  Matrix data_;
};

/// Tangent vectors of OB(n,d) are plain n x d matrices Xi with
/// ddiag(D^T Xi) = 0 for their base point D.
using ObliqueTangent = Matrix;

inline ObliquePoint normalize_columns(const Matrix& m) {
  require(m.rows() >= 1 && m.cols() >= 1, "normalize_columns: empty matrix");
  Matrix out = m;
  for (Index j = 0; j < out.cols(); ++j) {
    const double n = out.col(j).norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw Error("degenerate column " + std::to_string(j));
    }
    out.col(j) /= n;
  }
  return ObliquePoint(std::move(out));
}

/// Max over columns of |d_j^T xi_j|.
inline double tangency_defect(const ObliquePoint& d, const Matrix& xi) {
  return (d.matrix().cwiseProduct(xi)).colwise().sum().cwiseAbs().maxCoeff();
}

inline void check_tangent([[maybe_unused]] const ObliquePoint& d,
                          [[maybe_unused]] const Matrix& xi,
                          [[maybe_unused]] const char* what) {
#if SEPDICT_CHECK_PRECONDITIONS
  const double scale = std::max(1.0, xi.cwiseAbs().maxCoeff());
  if (tangency_defect(d, xi) > detail::kTangentTol * scale) {
    throw Error(std::string(what) + ": direction is not tangent");
  }
#endif
}

/// Pi(Q) = Q - D ddiag(D^T Q).
inline ObliqueTangent project_tangent_oblique(const ObliquePoint& d,
                                              const Matrix& q) {
  require_shape(q, d.rows(), d.cols(), "project_tangent_oblique");
  const Eigen::RowVectorXd dots = d.matrix().cwiseProduct(q).colwise().sum();
  return q - d.matrix() * dots.asDiagonal();
}

// ---------------------------------------------------------------------------
// Single sphere S^{n-1}

/// Great circle through unit `d` with initial velocity `h` (h orthogonal to d).
inline Vector sphere_geodesic(const Eigen::Ref<const Vector>& d,
                              const Eigen::Ref<const Vector>& h, double t) {
  const double nh = h.norm();
  if (nh == 0.0) return d;
  return d * std::cos(t * nh) + h * (std::sin(t * nh) / nh);
}

/// Parallel transport of xi (tangent at d) along the great circle
/// sphere_geodesic(d, h, .) to parameter t. Identity along a zero direction.
inline Vector sphere_transport(const Eigen::Ref<const Vector>& xi,
                               const Eigen::Ref<const Vector>& d,
                               const Eigen::Ref<const Vector>& h, double t) {
  const double nh = h.norm();
  if (nh == 0.0) return xi;
  const double coef = xi.dot(h) / (nh * nh);
  return xi - coef * (d * (nh * std::sin(t * nh)) + h * (1.0 - std::cos(t * nh)));
}

// ---------------------------------------------------------------------------
// Oblique manifold

inline ObliquePoint oblique_geodesic(const ObliquePoint& d, const Matrix& h,
                                     double t) {
  require_shape(h, d.rows(), d.cols(), "oblique_geodesic");
  check_tangent(d, h, "oblique_geodesic");
  Matrix out(d.rows(), d.cols());
  for (Index j = 0; j < d.cols(); ++j) {
    out.col(j) = sphere_geodesic(d.col(j), h.col(j), t);
  }
  renormalize_drift(out);
  return ObliquePoint(std::move(out));
}

inline ObliqueTangent oblique_transport(const Matrix& xi, const ObliquePoint& d,
                                        const Matrix& h, double t) {
  require_shape(xi, d.rows(), d.cols(), "oblique_transport");
  require_shape(h, d.rows(), d.cols(), "oblique_transport");
  check_tangent(d, xi, "oblique_transport");
  check_tangent(d, h, "oblique_transport");
  Matrix out(xi.rows(), xi.cols());
  for (Index j = 0; j < d.cols(); ++j) {
    out.col(j) = sphere_transport(xi.col(j), d.col(j), h.col(j), t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Product manifold R^{a x b x m} x OB(h,a) x OB(w,b)

/// Y = (X, A, B).
struct ProductPoint {
  CoefficientStack coeffs;  // a x b x m
  ObliquePoint dictA;       // h x a
  ObliquePoint dictB;       // w x b

  void check_consistent() const {
    require(coeffs.rows() == dictA.cols() && coeffs.cols() == dictB.cols(),
            "ProductPoint: coefficient shape does not match dictionaries");
  }
};

/// A tangent vector (or any ambient vector) of the product manifold.
struct ProductTangent {
  CoefficientStack coeffs;
  Matrix dirA;
  Matrix dirB;

  static ProductTangent zeros_like(const ProductPoint& y) {
    return {CoefficientStack(y.coeffs.rows(), y.coeffs.cols(), y.coeffs.count()),
            Matrix::Zero(y.dictA.rows(), y.dictA.cols()),
            Matrix::Zero(y.dictB.rows(), y.dictB.cols())};
  }

  ProductTangent& operator*=(double s) {
    coeffs.data() *= s;
    dirA *= s;
    dirB *= s;
    return *this;
  }

  /// this += s * other
  ProductTangent& add_scaled(double s, const ProductTangent& other) {
    coeffs.data() += s * other.coeffs.data();
    dirA += s * other.dirA;
    dirB += s * other.dirB;
    return *this;
  }

  ProductTangent operator-() const {
    ProductTangent out = *this;
    out *= -1.0;
    return out;
  }

  bool same_shape(const ProductTangent& o) const {
    return coeffs.same_shape(o.coeffs) && dirA.rows() == o.dirA.rows() &&
           dirA.cols() == o.dirA.cols() && dirB.rows() == o.dirB.rows() &&
           dirB.cols() == o.dirB.cols();
  }
};

inline void require_compatible(const ProductPoint& y, const ProductTangent& t,
                               const char* what) {
  if (!(t.coeffs.rows() == y.coeffs.rows() && t.coeffs.cols() == y.coeffs.cols() &&
        t.coeffs.count() == y.coeffs.count())) {
    throw Error(std::string(what) + ": coefficient shape mismatch");
  }
  require_shape(t.dirA, y.dictA.rows(), y.dictA.cols(), what);
  require_shape(t.dirB, y.dictB.rows(), y.dictB.cols(), what);
}

/// (Q1, Pi_A(Q2), Pi_B(Q3)).
inline ProductTangent project_tangent_product(const ProductPoint& y,
                                              const ProductTangent& q) {
  require_compatible(y, q, "project_tangent_product");
  return {q.coeffs, project_tangent_oblique(y.dictA, q.dirA),
          project_tangent_oblique(y.dictB, q.dirB)};
}

/// Euclidean (Frobenius) metric summed over the three components.
inline double inner_product(const ProductTangent& r, const ProductTangent& p) {
  require(r.same_shape(p), "inner_product: tangents have different shapes");
  return r.coeffs.data().cwiseProduct(p.coeffs.data()).sum() +
         r.dirA.cwiseProduct(p.dirA).sum() + r.dirB.cwiseProduct(p.dirB).sum();
}

inline double norm(const ProductTangent& r) {
  return std::sqrt(inner_product(r, r));
}

/// (X + tH1, Gamma_OB(A, H2, t), Gamma_OB(B, H3, t)).
inline ProductPoint product_geodesic(const ProductPoint& y,
                                     const ProductTangent& h, double t) {
  require_compatible(y, h, "product_geodesic");
  ProductPoint out{y.coeffs, oblique_geodesic(y.dictA, h.dirA, t),
                   oblique_geodesic(y.dictB, h.dirB, t)};
  out.coeffs.data() += t * h.coeffs.data();
  return out;
}

/// Transports xi from T_Y M to the tangent space at product_geodesic(y, h, t).
inline ProductTangent product_transport(const ProductTangent& xi,
                                        const ProductPoint& y,
                                        const ProductTangent& h, double t) {
  require_compatible(y, xi, "product_transport");
  require_compatible(y, h, "product_transport");
  return {xi.coeffs, oblique_transport(xi.dirA, y.dictA, h.dirA, t),
          oblique_transport(xi.dirB, y.dictB, h.dirB, t)};
}

}  // namespace sepdict
