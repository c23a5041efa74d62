// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the exit status is nonzero when any selected criterion fails.
//
//   acceptance [--only N]... [--data DIR]

#include "../test_support.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

using namespace sepdict;
using namespace sepdict::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome manifold_suite() {
  Stopwatch clock;
  Rng rng(1001);
  const int cases = 1000;
  std::uniform_int_distribution<Index> dim(2, 9);
  std::uniform_real_distribution<double> tdist(-4.0, 4.0);
  double worst_norm = 0.0, worst_idem = 0.0, worst_orth = 0.0, worst_iso = 0.0, worst_tan = 0.0;
  for (int k = 0; k < cases; ++k) {
    const Index n = dim(rng);
    const Index d = dim(rng);
    const auto pt = random_point(n, d, rng);
    const Matrix h = random_tangent(pt, rng);
    const double t = tdist(rng);

    const auto end = oblique_geodesic(pt, h, t);
    worst_norm = std::max(worst_norm, (end.matrix().colwise().norm().array() - 1.0).abs().maxCoeff());

    const Matrix q = gaussian(n, d, rng);
    const Matrix p = project_tangent_oblique(pt, q);
    worst_idem = std::max(worst_idem, (project_tangent_oblique(pt, p) - p).cwiseAbs().maxCoeff());
    worst_orth = std::max(worst_orth, std::abs((q - p).cwiseProduct(random_tangent(pt, rng)).sum()));

    const auto y = random_product_point(d, dim(rng), 2, n, dim(rng), rng);
    const auto dir = random_product_tangent(y, rng);
    const auto x1 = random_product_tangent(y, rng);
    const auto x2 = random_product_tangent(y, rng);
    const auto t1 = product_transport(x1, y, dir, t);
    const auto t2 = product_transport(x2, y, dir, t);
    worst_iso = std::max(worst_iso, std::abs(inner_product(t1, t2) - inner_product(x1, x2)));
    const auto yend = product_geodesic(y, dir, t);
    worst_tan = std::max({worst_tan, tangency_defect(yend.dictA, t1.dirA), tangency_defect(yend.dictB, t1.dirB)});
  }
  const double secs = clock.seconds();
  const bool pass = worst_norm <= 1e-12 && worst_idem <= 1e-10 && worst_orth <= 1e-10 && worst_iso <= 1e-10 &&
                    worst_tan <= 1e-10 && secs < 10.0;
  std::ostringstream s;
  s << cases << " cases each; max |norm-1|=" << fmt("%.2e", worst_norm) << " idempotence=" << fmt("%.2e", worst_idem)
    << " orthogonality=" << fmt("%.2e", worst_orth) << " isometry=" << fmt("%.2e", worst_iso)
    << " tangency=" << fmt("%.2e", worst_tan) << " time=" << fmt("%.1fs", secs);
  return {pass, s.str()};
}

Outcome gradient_oracle() {
  Stopwatch clock;
  Rng rng(1002);
  std::uniform_int_distribution<Index> rows(2, 8);
  std::uniform_int_distribution<Index> cols(2, 12);
  std::uniform_int_distribution<Index> count(1, 3);
  const int instances = 24;
  double worst = 0.0;
  for (int k = 0; k < instances; ++k) {
    const Index h = rows(rng), w = rows(rng), a = cols(rng), b = cols(rng), m = count(rng);
    auto y = random_product_point(a, b, m, h, w, rng);
    // Keep away from the coherence barrier where central differences of
    // the log terms are inaccurate.
    while (brute_mu(y.dictA.matrix()) > 0.95 || brute_mu(y.dictB.matrix()) > 0.95) {
      y = random_product_point(a, b, m, h, w, rng);
    }
    const TrainingSet s(gaussian(h, w * m, rng), w);
    const double weight = 0.1 / static_cast<double>(a * b);
    const ModelParams p{100.0, weight, weight};
    const auto g = euclidean_gradient_f(y, s, p);
    const Matrix& a0 = y.dictA.matrix();
    const Matrix& b0 = y.dictB.matrix();
    const Matrix fx = finite_difference(
        [&](const Matrix& x) { return cost_f_ambient(MatrixStack(x, b), a0, b0, s, p); }, y.coeffs.data());
    const Matrix fa = finite_difference([&](const Matrix& am) { return cost_f_ambient(y.coeffs, am, b0, s, p); }, a0);
    const Matrix fb = finite_difference([&](const Matrix& bm) { return cost_f_ambient(y.coeffs, a0, bm, s, p); }, b0);
    Vector fd(fx.size() + fa.size() + fb.size());
    fd << fx.reshaped(), fa.reshaped(), fb.reshaped();
    Vector an(fd.size());
    an << g.coeffs.data().reshaped(), g.dirA.reshaped(), g.dirB.reshaped();
    worst = std::max(worst, (fd - an).norm() / an.norm());
  }
  const double secs = clock.seconds();
  std::ostringstream s;
  s << instances << " instances; max relative error=" << fmt("%.2e", worst) << " time=" << fmt("%.1fs", secs);
  return {worst <= 1e-5 && secs < 30.0, s.str()};
}

Outcome coherence_oracle() {
  Rng rng(1003);
  std::uniform_int_distribution<Index> rows(1, 6);
  std::uniform_int_distribution<Index> cols(1, 10);
  double worst_kron = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto a = random_point(rows(rng), cols(rng), rng);
    auto b = random_point(rows(rng), cols(rng), rng);
    while (a.cols() * b.cols() < 2) b = random_point(rows(rng), cols(rng), rng);
    worst_kron = std::max(worst_kron, std::abs(kron_coherence(a, b) - brute_mu(brute_kron(b.matrix(), a.matrix()))));
  }
  std::uniform_int_distribution<Index> dim(2, 12);
  double worst_gap = 0.0;  // largest violation of either inequality
  for (int k = 0; k < 100; ++k) {
    const auto d = random_point(dim(rng), dim(rng) + 1, rng);
    const double r = coherence_r(d);
    const double mu = mutual_coherence_mu(d);
    const double mid = -std::log(1.0 - mu * mu);
    const double n = static_cast<double>(d.cols() * (d.cols() - 1) / 2);
    worst_gap = std::max({worst_gap, mid - r, r / n - mid});
  }
  std::ostringstream s;
  s << "100 pairs; max |mu(BxA) - explicit|=" << fmt("%.2e", worst_kron) << "; sandwich worst violation="
    << fmt("%.2e", std::max(0.0, worst_gap));
  return {worst_kron <= 1e-12 && worst_gap <= 1e-10, s.str()};
}

struct PlantedRun {
  Matrix a0, b0;
  TrainResult result;
  TrainResult repeat;
  CgConfig cfg;
  double seconds = 0.0;
};

const PlantedRun& planted_run() {
  static const PlantedRun run = [] {
    PlantedRun out;
    Rng rng(1004);
    const Index h = 8, w = 8, a = 12, b = 12, m = 5000;
    const auto pa = random_point(h, a, rng);
    const auto pb = random_point(w, b, rng);
    TrainingSet s(h, w, m);
    for (Index j = 0; j < m; ++j) {
      s.slice(j) = pa.matrix() * sparse_coefficients(a, b, 4, rng) * pb.matrix().transpose();
    }
    Rng init(2004);
    const auto ia = random_point(h, a, init);
    const auto ib = random_point(w, b, init);
    const double weight = 0.1 / static_cast<double>(a * b);
    const ModelParams params{100.0, weight, weight};
    Stopwatch clock;
    out.result = learn_dictionary(s, ia, ib, params, {}, out.cfg);
    out.seconds = clock.seconds();
    out.repeat = learn_dictionary(s, ia, ib, params, {}, out.cfg);
    out.a0 = pa.matrix();
    out.b0 = pb.matrix();
    return out;
  }();
  return run;
}

Outcome planted_recovery() {
  const auto& run = planted_run();
  const double fa = matched_fraction(run.a0, run.result.dict.a.matrix(), 0.99);
  const double fb = matched_fraction(run.b0, run.result.dict.b.matrix(), 0.99);
  const auto& rep = run.result.report;
  std::ostringstream s;
  s << "matched A=" << fmt("%.0f%%", 100 * fa) << " B=" << fmt("%.0f%%", 100 * fb) << " (need 80%); iterations="
    << rep.iterations << " final cost=" << fmt("%.4g", rep.final_cost) << " |G|=" << fmt("%.3g", rep.final_grad_norm)
    << " time=" << fmt("%.1fs", run.seconds);
  return {fa >= 0.8 && fb >= 0.8 && run.seconds < 600.0, s.str()};
}

Outcome fista_suite() {
  Stopwatch clock;
  Rng rng(1005);
  bool monotone = true;
  for (int k = 0; k < 50 && monotone; ++k) {
    const auto a = random_point(8, 12, rng);
    const auto b = random_point(8, 12, rng);
    std::optional<Mask> mask;
    if (k % 2) mask = (gaussian(8, 8, rng).array() > -0.3).matrix();
    const auto r = fista_solve({a, b, 50.0 * gaussian(8, 8, rng), 0.05 * (k + 1), mask}, {});
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
      if (r.objective_trace[i] > r.objective_trace[i - 1] + 1e-10) monotone = false;
    }
  }
  double worst_support = 1.0;
  FistaConfig stiff;
  stiff.max_iter = 20000;
  for (int k = 0; k < 10; ++k) {
    const auto a = random_point(8, 12, rng);
    const auto b = random_point(8, 12, rng);
    const Matrix x0 = sparse_coefficients(12, 12, 7, rng);  // 5% of 144
    const auto r = fista_solve({a, b, a.matrix() * x0 * b.matrix().transpose(), 1e4, {}}, stiff);
    int support = 0, found = 0;
    for (Index i = 0; i < x0.size(); ++i) {
      if (x0.data()[i] == 0.0) continue;
      ++support;
      if (r.x.data()[i] != 0.0 && std::abs(r.x.data()[i] - x0.data()[i]) <= 1e-2) ++found;
    }
    worst_support = std::min(worst_support, static_cast<double>(found) / support);
  }
  bool bit_exact = true;
  for (int k = 0; k < 20; ++k) {
    const auto a = random_point(8, 12, rng);
    const auto b = random_point(8, 12, rng);
    const Matrix s = 30.0 * gaussian(8, 8, rng);
    const Mask mask = (gaussian(8, 8, rng).array() > 0.0).matrix();
    Matrix other = s;
    for (Index i = 0; i < s.size(); ++i)
      if (!mask.data()[i]) other.data()[i] = 1e3 * gaussian(1, 1, rng)(0, 0);
    if (fista_solve({a, b, s, 2.0, mask}, {}).x != fista_solve({a, b, other, 2.0, mask}, {}).x) bit_exact = false;
  }
  const double secs = clock.seconds();
  std::ostringstream s;
  s << "monotone=" << (monotone ? "yes" : "no") << " worst support recovery=" << fmt("%.0f%%", 100 * worst_support)
    << " mask bit-exact=" << (bit_exact ? "yes" : "no") << " time=" << fmt("%.1fs", secs);
  return {monotone && worst_support >= 0.9 && bit_exact && secs < 30.0, s.str()};
}

Outcome noise_anchor(const std::string& data) {
  const auto clean = read_pgm(data + "/lena.pgm");
  const auto noisy = add_gaussian_noise(clean, 20.0, 20);
  const double p = psnr(clean, noisy);
  return {std::abs(p - 22.11) <= 0.05, "PSNR=" + fmt("%.3f", p) + " dB (target 22.11 +/- 0.05)"};
}

Outcome odct_anchor(const std::string& data) {
  const auto clean = read_pgm(data + "/lena.pgm");
  const auto noisy = add_gaussian_noise(clean, 20.0, 20);
  const Matrix sep = odct_dictionary(8, 16).matrix();
  const auto a = ObliquePoint::from_unit_columns(kronecker(sep, sep));
  const auto b = ObliquePoint::from_unit_columns(Matrix::Ones(1, 1));
  Stopwatch clock;
  const auto out = denoise_image(noisy, a, b, 20.0);
  const double secs = clock.seconds();
  const double p = psnr(clean, out);
  std::ostringstream s;
  s << "PSNR=" << fmt("%.2f", p) << " dB (target 32.00 +/- 0.5) time=" << fmt("%.1fs", secs);
  return {std::abs(p - 32.0) <= 0.5 && secs < 300.0, s.str()};
}

Outcome optimizer_contracts() {
  const auto& run = planted_run();
  const auto& rep = run.result.report;
  bool dominance = rep.cost_trace.size() == rep.reference_trace.size();
  for (std::size_t i = 0; dominance && i < rep.cost_trace.size(); ++i) {
    dominance = rep.cost_trace[i] <= rep.reference_trace[i] * (1 + 1e-14);
  }
  const bool descent = std::all_of(rep.slope_trace.begin(), rep.slope_trace.end(), [](double v) { return v < 0.0; });
  const bool deterministic = rep.cost_trace == run.repeat.report.cost_trace;
  const bool lengths = rep.cost_trace.size() == static_cast<std::size_t>(rep.iterations) + 1;
  const bool stop = rep.converged ? rep.final_grad_norm < run.cfg.grad_tol
                                  : rep.iterations == run.cfg.max_iter && !(rep.final_grad_norm < run.cfg.grad_tol);
  std::ostringstream s;
  s << "C dominance=" << (dominance ? "yes" : "no") << " descent at every line search=" << (descent ? "yes" : "no")
    << " deterministic trace=" << (deterministic ? "yes" : "no") << " trace length=" << (lengths ? "ok" : "bad")
    << " stop rule=" << (stop ? "ok" : "bad") << " (converged=" << (rep.converged ? "true" : "false") << ")";
  return {dominance && descent && deterministic && lengths && stop, s.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  std::string data = SEPDICT_TEST_DATA;
  app.add_option("--only", only, "Run only these criteria (1-8)")->check(CLI::Range(1, 8));
  app.add_option("--data", data, "Directory holding lena.pgm");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"manifold geometry", manifold_suite},
      {"gradient vs finite differences", gradient_oracle},
      {"Kronecker coherence and sandwich bound", coherence_oracle},
      {"planted separable recovery", planted_recovery},
      {"FISTA suite", fista_suite},
      {"noise PSNR anchor", [&] { return noise_anchor(data); }},
      {"ODCT denoising anchor", [&] { return odct_anchor(data); }},
      {"optimizer contracts", optimizer_contracts},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
