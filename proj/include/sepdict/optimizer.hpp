#pragma once

// Geometric conjugate gradient on R^{a x b x m} x OB(h,a) x OB(w,b) with the
// hybrid Hestenes-Stiefel / Dai-Yuan update and a Zhang-Hager style
// nonmonotone backtracking line search.

#include <sepdict/core.hpp>
#include <sepdict/manifold.hpp>
#include <sepdict/objective.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <vector>

namespace sepdict {

struct LineSearchParams {
  double t0 = 1.0;  // step tried on the first iteration
  double c1 = 0.5;  // backtracking contraction
  double c2 = 1e-4;  // sufficient-decrease slope
  double eta = 0.85;  // history mixing
  int max_backtracks = 50;

  void validate() const {
    require(t0 > 0.0, "LineSearchParams: t0 must be positive");
    require(c1 > 0.0 && c1 < 1.0, "LineSearchParams: c1 must lie in (0,1)");
    require(c2 > 0.0 && c2 < 0.5, "LineSearchParams: c2 must lie in (0,0.5)");
    require(eta >= 0.0 && eta <= 1.0, "LineSearchParams: eta must lie in [0,1]");
    require(max_backtracks >= 1, "LineSearchParams: max_backtracks must be positive");
  }
};

/// Accumulated weight Q and reference value C.
struct LineSearchState {
  double q = 1.0;
  double c = 0.0;

  static LineSearchState start(double initial_cost) { return {1.0, initial_cost}; }
};

struct LineSearchResult {
  double alpha = 0.0;
  double cost = 0.0;  // cost at the accepted step
  LineSearchState state;
  int backtracks = 0;
};

class LineSearchFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Backtracks t <- c1 t from t0 until cost_along(t) <= C + c2 t slope, where
/// slope = <G, H> < 0, then updates Q <- eta Q + 1 and
/// C <- (eta Q_old C_old + f_new) / Q_new. Non-finite costs are rejections.
template <class CostAlong>
LineSearchResult nonmonotone_line_search(CostAlong&& cost_along, double slope,
                                         const LineSearchState& state,
                                         const LineSearchParams& p, double t0) {
  require(slope < 0.0, "nonmonotone_line_search: not a descent direction");
  require(t0 > 0.0, "nonmonotone_line_search: t0 must be positive");
  double t = t0;
  for (int k = 0; k <= p.max_backtracks; ++k) {
    const double f = cost_along(t);
    if (std::isfinite(f) && f <= state.c + p.c2 * t * slope) {
      LineSearchResult out;
      out.alpha = t;
      out.cost = f;
      out.backtracks = k;
      out.state.q = p.eta * state.q + 1.0;
      out.state.c = (p.eta * state.q * state.c + f) / out.state.q;
      return out;
    }
    t *= p.c1;
  }
  std::ostringstream msg;
  msg << "line search failed after " << p.max_backtracks
      << " backtracks (t0=" << t0 << ", slope=" << slope << ", C=" << state.c << ")";
  throw LineSearchFailure(msg.str());
}

/// max{0, min{<G+,Z>, <G+,G+>} / <TH,Z>} from the three inner products.
/// Returns 0 when the denominator vanishes.
inline double beta_hybrid(double g_dot_z, double g_dot_g, double th_dot_z) {
  if (th_dot_z == 0.0 || !std::isfinite(th_dot_z)) return 0.0;
  const double hs = g_dot_z / th_dot_z;
  const double dy = g_dot_g / th_dot_z;
  const double beta = std::max(0.0, std::min(hs, dy));
  return std::isfinite(beta) ? beta : 0.0;
}

/// Hybrid HS/DY coefficient with Z = G+ - T(G).
inline double beta_hybrid(const ProductTangent& g_next,
                          const ProductTangent& g_transported,
                          const ProductTangent& h_transported) {
  ProductTangent z = g_next;
  z.add_scaled(-1.0, g_transported);
  return beta_hybrid(inner_product(g_next, z), inner_product(g_next, g_next),
                     inner_product(h_transported, z));
}

struct CgConfig {
  double grad_tol = 1e-4;
  int max_iter = 600;
  std::uint64_t seed = 0;  // used by callers that draw initial dictionaries
  int restart_every = 500;

  void validate() const {
    require(grad_tol > 0.0, "CgConfig: grad_tol must be positive");
    require(max_iter >= 1, "CgConfig: max_iter must be positive");
    require(restart_every >= 1, "CgConfig: restart_every must be positive");
  }
};

struct TrainReport {
  int iterations = 0;
  double final_cost = 0.0;
  double final_grad_norm = 0.0;
  bool converged = false;
  std::vector<double> cost_trace;       // f(Y^(i)), i = 0..iterations
  std::vector<double> reference_trace;  // C^(i), i = 0..iterations
  std::vector<double> slope_trace;      // <G^(i), H^(i)> entering each line search
  std::vector<double> step_trace;       // alpha^(i)
  int restarts = 0;                     // steepest-descent resets
};

struct IterationInfo {
  int iteration = 0;
  double cost = 0.0;
  double grad_norm = 0.0;
  double alpha = 0.0;
};

using ProgressCallback = std::function<void(const IterationInfo&)>;

struct DictionaryPair {
  ObliquePoint a;  // h x a
  ObliquePoint b;  // w x b
};

struct TrainResult {
  DictionaryPair dict;
  CoefficientStack coeffs;
  TrainReport report;
};

/// Standard-normal rows x cols matrix with normalized columns.
template <class Rng>
ObliquePoint random_oblique(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return normalize_columns(m);
}

/// X_k = A^T S_k B.
inline CoefficientStack initial_coefficients(const TrainingSet& s,
                                             const ObliquePoint& a,
                                             const ObliquePoint& b) {
  require(s.rows() == a.rows() && s.cols() == b.rows(),
          "initial_coefficients: dimension mismatch");
  MatrixStack sb(s.rows(), b.cols(), s.count());
  for (Index j = 0; j < s.count(); ++j) sb.slice(j).noalias() = s.slice(j) * b.matrix();
  return MatrixStack(a.matrix().transpose() * sb.data(), b.cols());
}

inline TrainResult learn_dictionary(const TrainingSet& s, const ObliquePoint& a0,
                               const ObliquePoint& b0, const ModelParams& params,
                               const LineSearchParams& ls, const CgConfig& cfg,
                               const ProgressCallback& progress = {}) {
  params.validate();
  ls.validate();
  cfg.validate();
  require(s.count() >= 1, "learn_dictionary: empty training set");
  if (s.rows() != a0.rows() || s.cols() != b0.rows()) {
    throw Error("learn_dictionary: training samples are " + std::to_string(s.rows()) +
                "x" + std::to_string(s.cols()) + " but dictionaries expect " +
                std::to_string(a0.rows()) + "x" + std::to_string(b0.rows()));
  }

  ProductPoint y{initial_coefficients(s, a0, b0), a0, b0};
  double f = cost_f(y, s, params);
  if (!std::isfinite(f)) throw NumericalError("learn_dictionary: initial cost is not finite");
  ProductTangent g = riemannian_gradient(y, s, params);
  ProductTangent h = -g;
  LineSearchState state = LineSearchState::start(f);

  TrainReport report;
  report.cost_trace.push_back(f);
  report.reference_trace.push_back(state.c);
  double grad_norm = norm(g);
  double alpha_prev = 0.0;
  int since_restart = 0;

  for (int i = 0; i < cfg.max_iter && !(grad_norm < cfg.grad_tol); ++i) {
    double slope = inner_product(g, h);
    if (!(slope < 0.0) || since_restart >= cfg.restart_every) {
      h = -g;
      slope = -grad_norm * grad_norm;
      since_restart = 0;
      ++report.restarts;
    }
    const double t0 = i == 0 ? ls.t0 : std::max(2.0 * alpha_prev, 1e-8);
    auto cost_along = [&](double t) { return cost_f(product_geodesic(y, h, t), s, params); };

    LineSearchResult step;
    try {
      step = nonmonotone_line_search(cost_along, slope, state, ls, t0);
    } catch (const LineSearchFailure& e) {
      if (since_restart == 0) {
        throw NumericalError(std::string("learn_dictionary: iteration ") + std::to_string(i) +
                             ": " + e.what() + " along steepest descent");
      }
      h = -g;
      slope = -grad_norm * grad_norm;
      since_restart = 0;
      ++report.restarts;
      try {
        step = nonmonotone_line_search(cost_along, slope, state, ls, t0);
      } catch (const LineSearchFailure& e2) {
        throw NumericalError(std::string("learn_dictionary: iteration ") + std::to_string(i) +
                             ": " + e2.what() + " after steepest-descent restart");
      }
    }
    report.slope_trace.push_back(slope);
    report.step_trace.push_back(step.alpha);

    ProductPoint y_next = product_geodesic(y, h, step.alpha);
    ProductTangent g_next = riemannian_gradient(y_next, s, params);
    const ProductTangent th = product_transport(h, y, h, step.alpha);
    const ProductTangent tg = product_transport(g, y, h, step.alpha);
    const double beta = beta_hybrid(g_next, tg, th);

    h = -g_next;
    h.add_scaled(beta, th);
    // Tangency of the transported direction degrades slowly; re-project.
    h.dirA = project_tangent_oblique(y_next.dictA, h.dirA);
    h.dirB = project_tangent_oblique(y_next.dictB, h.dirB);

    y = std::move(y_next);
    g = std::move(g_next);
    f = step.cost;
    state = step.state;
    grad_norm = norm(g);
    alpha_prev = step.alpha;
    ++since_restart;
    ++report.iterations;
    report.cost_trace.push_back(f);
    report.reference_trace.push_back(state.c);
    if (progress) progress({i + 1, f, grad_norm, step.alpha});
  }

  report.final_cost = f;
  report.final_grad_norm = grad_norm;
  report.converged = grad_norm < cfg.grad_tol;
  return {DictionaryPair{y.dictA, y.dictB}, std::move(y.coeffs), std::move(report)};
}

}  // namespace sepdict
