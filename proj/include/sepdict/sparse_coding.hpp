#pragma once

// FISTA for the separable synthesis problem
//
//   min_X  ||X||_1 + lambda_d ||P(A X B^T - S)||_F^2
//
// where P zeroes unobserved entries (identity without a mask). The batched
// solver treats every column of a (h*w) x N target matrix as an independent
// problem sharing the same dictionaries; the single-problem API is a batch of
// one.

#include <sepdict/core.hpp>
#include <sepdict/manifold.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace sepdict {

using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline double soft_threshold(double x, double tau) {
  if (x > tau) return x - tau;
  if (x < -tau) return x + tau;
  return 0.0;
}

/// Largest singular value by power iteration on M^T M from the all-ones
/// vector (at most 1000 iterations, relative tolerance 1e-12).
inline double spectral_norm(const Matrix& m) {
  require(m.size() > 0, "spectral_norm: empty matrix");
  const Matrix mtm = m.transpose() * m;
  Vector v = Vector::Ones(mtm.cols());
  v.normalize();
  double est = 0.0;
  for (int it = 0; it < 1000; ++it) {
    Vector w = mtm * v;
    const double next = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    if (std::abs(next - est) <= 1e-12 * std::abs(next)) {
      est = next;
      break;
    }
    est = next;
  }
  // Rayleigh quotient at the final vector.
  est = std::max(est, v.dot(mtm * v));
  return std::sqrt(std::max(0.0, est));
}

/// L = 2 lambda_d sigma_max(A)^2 sigma_max(B)^2.
inline double lipschitz_bound(const ObliquePoint& a, const ObliquePoint& b,
                              double lambda_d) {
  require(lambda_d > 0.0, "lipschitz_bound: lambda_d must be positive");
  const double sa = spectral_norm(a.matrix());
  const double sb = spectral_norm(b.matrix());
  return 2.0 * lambda_d * sa * sa * sb * sb;
}

/// vec(X) -> vec(A X B^T) for column-major vectorization, applied to every
/// column of a batch. Equivalent to multiplying by (B kron A) without
/// forming it.
class SeparableOperator {
 public:
  SeparableOperator(const Matrix& a, const Matrix& b) : a_(a), b_(b) {}

  Index signal_size() const { return a_.rows() * b_.rows(); }
  Index coeff_size() const { return a_.cols() * b_.cols(); }

  /// (a*b) x N -> (h*w) x N
  Matrix apply(const Matrix& xs) const {
    require(xs.rows() == coeff_size(), "SeparableOperator::apply: shape mismatch");
    const Index n = xs.cols();
    if (b_.size() == 1) return b_(0, 0) * (a_ * xs);
    Eigen::Map<const Matrix> xw(xs.data(), a_.cols(), b_.cols() * n);
    const Matrix ax = a_ * xw;  // h x (b N)
    Matrix out(signal_size(), n);
    for (Index j = 0; j < n; ++j) {
      Eigen::Map<Matrix> o(out.col(j).data(), a_.rows(), b_.rows());
      o.noalias() = ax.middleCols(j * b_.cols(), b_.cols()) * b_.transpose();
    }
    return out;
  }

  /// (h*w) x N -> (a*b) x N, the transpose of apply.
  Matrix adjoint(const Matrix& rs) const {
    require(rs.rows() == signal_size(), "SeparableOperator::adjoint: shape mismatch");
    const Index n = rs.cols();
    if (b_.size() == 1) return b_(0, 0) * (a_.transpose() * rs);
    Eigen::Map<const Matrix> rw(rs.data(), a_.rows(), b_.rows() * n);
    const Matrix atr = a_.transpose() * rw;  // a x (w N)
    Matrix out(coeff_size(), n);
    for (Index j = 0; j < n; ++j) {
      Eigen::Map<Matrix> o(out.col(j).data(), a_.cols(), b_.cols());
      o.noalias() = atr.middleCols(j * b_.rows(), b_.rows()) * b_;
    }
    return out;
  }

 private:
  const Matrix& a_;
  const Matrix& b_;
};

struct FistaConfig {
  int max_iter = 400;
  double tol = 1e-8;  // relative objective change
  std::optional<double> step;  // overrides 1/L

  void validate() const {
    require(max_iter >= 1, "FistaConfig: max_iter must be at least 1");
    require(tol > 0.0, "FistaConfig: tol must be positive");
    require(!step || *step > 0.0, "FistaConfig: step must be positive");
  }
};

struct FistaBatchResult {
  Matrix x;                  // (a*b) x N
  std::vector<int> iterations;  // per column
};

namespace detail {

/// ||x||_1 + lambda ||r||^2 per column.
inline Eigen::RowVectorXd fista_objective(const Matrix& x, const Matrix& masked_res,
                                          double lambda) {
  return x.cwiseAbs().colwise().sum() + lambda * masked_res.colwise().squaredNorm();
}

inline Matrix masked_residual(const Matrix& ax, const Matrix& s, const Matrix* mask) {
  Matrix r = ax - s;
  if (mask) r = r.cwiseProduct(*mask);
  return r;
}

inline Matrix take_columns(const Matrix& m, const std::vector<Index>& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = m.col(cols[k]);
  return out;
}

}  // namespace detail

/// Solves N independent problems. `mask`, when given, holds 1.0 at observed
/// and 0.0 at unobserved entries and has the shape of `targets`. Each column
/// stops on its own once its relative objective change drops below tol.
/// `traces`, when non-null, receives per-column objective traces starting at
/// the initial point.
inline FistaBatchResult fista_solve_batch(const ObliquePoint& dict_a,
                                          const ObliquePoint& dict_b,
                                          const Matrix& targets, double lambda_d,
                                          const Matrix* mask, const FistaConfig& cfg,
                                          const Matrix* warm_start = nullptr,
                                          std::vector<std::vector<double>>* traces = nullptr) {
  cfg.validate();
  require(lambda_d > 0.0, "fista_solve: lambda_d must be positive");
  const SeparableOperator op(dict_a.matrix(), dict_b.matrix());
  require(targets.rows() == op.signal_size(), "fista_solve: target shape mismatch");
  if (mask) {
    require(mask->rows() == targets.rows() && mask->cols() == targets.cols(),
            "fista_solve: mask shape mismatch");
  }
  const Index total = targets.cols();
  const double step = cfg.step ? *cfg.step : 1.0 / lipschitz_bound(dict_a, dict_b, lambda_d);

  FistaBatchResult result;
  result.x = warm_start ? *warm_start : Matrix::Zero(op.coeff_size(), total);
  require(result.x.rows() == op.coeff_size() && result.x.cols() == total,
          "fista_solve: warm start shape mismatch");
  result.iterations.assign(static_cast<std::size_t>(total), 0);
  if (traces) traces->assign(static_cast<std::size_t>(total), {});

  // Working set of unconverged columns, compacted as columns finish.
  std::vector<Index> active(static_cast<std::size_t>(total));
  for (Index j = 0; j < total; ++j) active[static_cast<std::size_t>(j)] = j;
  Matrix s = targets;
  std::optional<Matrix> mk;
  if (mask) mk = *mask;
  Matrix x = result.x;
  Matrix ax = op.apply(x);
  Eigen::RowVectorXd fx =
      detail::fista_objective(x, detail::masked_residual(ax, s, mk ? &*mk : nullptr), lambda_d);
  Matrix y = x;
  Matrix ay = ax;
  Eigen::RowVectorXd t = Eigen::RowVectorXd::Ones(total);
  if (traces) {
    for (Index j = 0; j < total; ++j) (*traces)[static_cast<std::size_t>(j)].push_back(fx(j));
  }

  auto prox_step = [&](const Matrix& base, const Matrix& abase, const Matrix& sv,
                       const Matrix* mv) {
    Matrix z = base - (2.0 * lambda_d * step) * op.adjoint(detail::masked_residual(abase, sv, mv));
    return z.unaryExpr([step](double v) { return soft_threshold(v, step); }).eval();
  };

  for (int it = 1; it <= cfg.max_iter && !active.empty(); ++it) {
    const Matrix* mptr = mk ? &*mk : nullptr;
    Matrix z = prox_step(y, ay, s, mptr);
    Matrix az = op.apply(z);
    Eigen::RowVectorXd fz =
        detail::fista_objective(z, detail::masked_residual(az, s, mptr), lambda_d);

    // Objective increase: drop momentum and take a plain proximal step from x.
    std::vector<Index> rising;
    for (Index k = 0; k < z.cols(); ++k) {
      if (!(fz(k) <= fx(k))) rising.push_back(k);
    }
    if (!rising.empty()) {
      const Matrix xr = detail::take_columns(x, rising);
      const Matrix axr = detail::take_columns(ax, rising);
      const Matrix sr = detail::take_columns(s, rising);
      std::optional<Matrix> mr;
      if (mk) mr = detail::take_columns(*mk, rising);
      const Matrix zr = prox_step(xr, axr, sr, mr ? &*mr : nullptr);
      const Matrix azr = op.apply(zr);
      const Eigen::RowVectorXd fzr =
          detail::fista_objective(zr, detail::masked_residual(azr, sr, mr ? &*mr : nullptr), lambda_d);
      for (std::size_t q = 0; q < rising.size(); ++q) {
        const Index k = rising[q];
        const Index qi = static_cast<Index>(q);
        // A 1/L proximal step never increases the objective; guard rounding.
        if (fzr(qi) <= fx(k)) {
          z.col(k) = zr.col(qi);
          az.col(k) = azr.col(qi);
          fz(k) = fzr(qi);
        } else {
          z.col(k) = x.col(k);
          az.col(k) = ax.col(k);
          fz(k) = fx(k);
        }
        t(k) = 1.0;
      }
    }

    std::vector<Index> keep;
    keep.reserve(active.size());
    for (Index k = 0; k < z.cols(); ++k) {
      const Index global = active[static_cast<std::size_t>(k)];
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t(k) * t(k)));
      const double mom = (t(k) - 1.0) / tn;
      y.col(k) = z.col(k) + mom * (z.col(k) - x.col(k));
      ay.col(k) = az.col(k) + mom * (az.col(k) - ax.col(k));
      t(k) = tn;
      const double change = std::abs(fx(k) - fz(k));
      const double scale = std::max(std::abs(fx(k)), std::numeric_limits<double>::min());
      x.col(k) = z.col(k);
      ax.col(k) = az.col(k);
      fx(k) = fz(k);
      result.iterations[static_cast<std::size_t>(global)] = it;
      if (traces) (*traces)[static_cast<std::size_t>(global)].push_back(fz(k));
      if (change <= cfg.tol * scale) {
        result.x.col(global) = x.col(k);
      } else {
        keep.push_back(k);
      }
    }

    if (static_cast<Index>(keep.size()) != static_cast<Index>(active.size())) {
      std::vector<Index> next_active;
      next_active.reserve(keep.size());
      for (Index k : keep) next_active.push_back(active[static_cast<std::size_t>(k)]);
      x = detail::take_columns(x, keep);
      ax = detail::take_columns(ax, keep);
      y = detail::take_columns(y, keep);
      ay = detail::take_columns(ay, keep);
      s = detail::take_columns(s, keep);
      if (mk) mk = detail::take_columns(*mk, keep);
      Eigen::RowVectorXd fk(static_cast<Index>(keep.size()));
      Eigen::RowVectorXd tk(static_cast<Index>(keep.size()));
      for (std::size_t q = 0; q < keep.size(); ++q) {
        fk(static_cast<Index>(q)) = fx(keep[q]);
        tk(static_cast<Index>(q)) = t(keep[q]);
      }
      fx = fk;
      t = tk;
      active = std::move(next_active);
    }
  }
  for (std::size_t k = 0; k < active.size(); ++k) {
    result.x.col(active[k]) = x.col(static_cast<Index>(k));
  }
  return result;
}

/// One separable sparse-coding problem.
struct SparseCodeProblem {
  ObliquePoint dictA;  // h x a
  ObliquePoint dictB;  // w x b
  Matrix target;       // h x w
  double lambda_d = 1.0;
  std::optional<Mask> mask;  // true = observed

  void validate() const {
    require_shape(target, dictA.rows(), dictB.rows(), "SparseCodeProblem target");
    require(lambda_d > 0.0, "SparseCodeProblem: lambda_d must be positive");
    if (mask) {
      require(mask->rows() == target.rows() && mask->cols() == target.cols(),
              "SparseCodeProblem: mask shape mismatch");
      require(mask->any(), "SparseCodeProblem: mask has no observed entry");
    }
  }
};

struct FistaResult {
  Matrix x;  // a x b
  std::vector<double> objective_trace;
  int iterations = 0;
};

inline double fista_objective(const SparseCodeProblem& prob, const Matrix& x) {
  Matrix r = prob.dictA.matrix() * x * prob.dictB.matrix().transpose() - prob.target;
  if (prob.mask) r = r.cwiseProduct(prob.mask->cast<double>());
  return x.cwiseAbs().sum() + prob.lambda_d * r.squaredNorm();
}

inline FistaResult fista_solve(const SparseCodeProblem& prob, const FistaConfig& cfg,
                               const std::optional<Matrix>& warm_start = std::nullopt) {
  prob.validate();
  const Index a = prob.dictA.cols();
  const Index b = prob.dictB.cols();
  const Matrix target = prob.target.reshaped();
  std::optional<Matrix> mask;
  if (prob.mask) mask = prob.mask->cast<double>().reshaped();
  std::optional<Matrix> warm;
  if (warm_start) {
    require_shape(*warm_start, a, b, "fista_solve warm start");
    warm = warm_start->reshaped();
  }
  std::vector<std::vector<double>> traces;
  auto batch = fista_solve_batch(prob.dictA, prob.dictB, target, prob.lambda_d,
                                 mask ? &*mask : nullptr, cfg, warm ? &*warm : nullptr,
                                 &traces);
  FistaResult out;
  out.x = batch.x.reshaped(a, b);
  out.objective_trace = std::move(traces.front());
  out.iterations = batch.iterations.front();
  return out;
}

}  // namespace sepdict
