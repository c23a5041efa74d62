#pragma once

// Patch extraction and normalization, overlap-averaged reconstruction, noise
// synthesis, the overcomplete DCT dictionary, PSNR/SSIM, and the denoising
// and inpainting pipelines built on the separable FISTA solver.

#include <sepdict/core.hpp>
#include <sepdict/manifold.hpp>
#include <sepdict/pgm.hpp>
#include <sepdict/sparse_coding.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace sepdict {

struct PatchOrigin {
  Index row = 0;
  Index col = 0;
  std::size_t source = 0;  // index of the source image
  friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

/// m patches of size h x w with their origins and the DC / scale removed
/// from each (0 and 1 when untouched).
struct PatchSet {
  MatrixStack patches;
  std::vector<PatchOrigin> origins;
  std::vector<double> means;
  std::vector<double> norms;

  Index patch_rows() const { return patches.rows(); }
  Index patch_cols() const { return patches.cols(); }
  Index count() const { return patches.count(); }
};

struct AllOverlapping {};
struct RandomPositions {
  std::size_t count = 0;
  std::uint64_t seed = 0;
};
using ExtractionMode = std::variant<AllOverlapping, RandomPositions>;

namespace detail {

inline void require_patch_fits(const GrayImage& img, Index h, Index w) {
  require(h >= 1 && w >= 1, "extract_patches: patch dimensions must be positive");
  if (h > img.height() || w > img.width()) {
    throw Error("patch " + std::to_string(h) + "x" + std::to_string(w) +
                " is larger than image " + std::to_string(img.height()) + "x" +
                std::to_string(img.width()));
  }
}

inline PatchSet make_patch_set(Index h, Index w, std::vector<PatchOrigin> origins) {
  const auto m = static_cast<Index>(origins.size());
  PatchSet ps{MatrixStack(h, w, m), std::move(origins), {}, {}};
  ps.means.assign(static_cast<std::size_t>(m), 0.0);
  ps.norms.assign(static_cast<std::size_t>(m), 1.0);
  return ps;
}

}  // namespace detail

/// Row-major grid of every valid origin, or `count` origins drawn uniformly
/// with replacement using std::mt19937_64(seed).
inline PatchSet extract_patches(const GrayImage& img, Index h, Index w,
                                const ExtractionMode& mode) {
  detail::require_patch_fits(img, h, w);
  const Index rows = img.height() - h + 1;
  const Index cols = img.width() - w + 1;
  std::vector<PatchOrigin> origins;
  if (std::holds_alternative<AllOverlapping>(mode)) {
    origins.reserve(static_cast<std::size_t>(rows * cols));
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) origins.push_back({r, c, 0});
  } else {
    const auto& rnd = std::get<RandomPositions>(mode);
    std::mt19937_64 rng(rnd.seed);
    std::uniform_int_distribution<Index> pick_r(0, rows - 1);
    std::uniform_int_distribution<Index> pick_c(0, cols - 1);
    origins.reserve(rnd.count);
    for (std::size_t k = 0; k < rnd.count; ++k) {
      const Index r = pick_r(rng);
      const Index c = pick_c(rng);
      origins.push_back({r, c, 0});
    }
  }
  PatchSet ps = detail::make_patch_set(h, w, std::move(origins));
  for (Index j = 0; j < ps.count(); ++j) {
    const auto& o = ps.origins[static_cast<std::size_t>(j)];
    ps.patches.slice(j) = img.pixels().block(o.row, o.col, h, w);
  }
  return ps;
}

/// `count` random patches spread over several images: each draw picks a
/// source image uniformly, then an origin uniformly within it.
inline PatchSet extract_random_patches(std::span<const GrayImage> images, Index h,
                                       Index w, std::size_t count, std::uint64_t seed) {
  require(!images.empty(), "extract_random_patches: no images");
  for (const auto& img : images) detail::require_patch_fits(img, h, w);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_img(0, images.size() - 1);
  std::vector<PatchOrigin> origins;
  origins.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t src = pick_img(rng);
    const auto& img = images[src];
    std::uniform_int_distribution<Index> pick_r(0, img.height() - h);
    std::uniform_int_distribution<Index> pick_c(0, img.width() - w);
    const Index r = pick_r(rng);
    const Index c = pick_c(rng);
    origins.push_back({r, c, src});
  }
  PatchSet ps = detail::make_patch_set(h, w, std::move(origins));
  for (Index j = 0; j < ps.count(); ++j) {
    const auto& o = ps.origins[static_cast<std::size_t>(j)];
    ps.patches.slice(j) = images[o.source].pixels().block(o.row, o.col, h, w);
  }
  return ps;
}

struct NormalizedPatches {
  PatchSet set;
  std::size_t skipped = 0;  // constant patches dropped
};

/// Zero mean and unit Frobenius norm per patch; constant patches are dropped.
inline NormalizedPatches normalize_training_patches(const PatchSet& ps) {
  std::vector<Index> kept;
  std::vector<double> means;
  std::vector<double> norms;
  for (Index j = 0; j < ps.count(); ++j) {
    const auto p = ps.patches.slice(j);
    const double mean = p.mean();
    const double n = (p.array() - mean).matrix().norm();
    if (!(n > 1e-10 * std::max(1.0, std::abs(mean)))) continue;
    kept.push_back(j);
    means.push_back(mean);
    norms.push_back(n);
  }
  NormalizedPatches out;
  out.skipped = static_cast<std::size_t>(ps.count()) - kept.size();
  out.set.patches = MatrixStack(ps.patch_rows(), ps.patch_cols(), static_cast<Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const Index j = kept[k];
    out.set.patches.slice(static_cast<Index>(k)) =
        ((ps.patches.slice(j).array() - means[k]) / norms[k]).matrix();
    out.set.origins.push_back(ps.origins[static_cast<std::size_t>(j)]);
  }
  out.set.means = std::move(means);
  out.set.norms = std::move(norms);
  return out;
}

/// Each pixel becomes the mean of every patch value covering it.
inline GrayImage assemble_average(const PatchSet& ps, Index height, Index width) {
  require(static_cast<Index>(ps.origins.size()) == ps.count(),
          "assemble_average: origins do not match patches");
  Matrix sum = Matrix::Zero(height, width);
  Matrix cover = Matrix::Zero(height, width);
  const Index h = ps.patch_rows();
  const Index w = ps.patch_cols();
  for (Index j = 0; j < ps.count(); ++j) {
    const auto& o = ps.origins[static_cast<std::size_t>(j)];
    if (o.row < 0 || o.col < 0 || o.row + h > height || o.col + w > width) {
      throw Error("assemble_average: patch origin out of bounds");
    }
    sum.block(o.row, o.col, h, w) += ps.patches.slice(j);
    cover.block(o.row, o.col, h, w).array() += 1.0;
  }
  if ((cover.array() == 0.0).any()) throw Error("assemble_average: uncovered pixel");
  return GrayImage(sum.cwiseQuotient(cover));
}

/// 10 log10(255^2 N / sum (ref - test)^2); +inf for identical images.
inline double psnr(const GrayImage& ref, const GrayImage& test) {
  require(ref.height() == test.height() && ref.width() == test.width(),
          "psnr: image dimensions differ");
  const double sse = (ref.pixels() - test.pixels()).squaredNorm();
  if (sse == 0.0) return kInf;
  return 10.0 * std::log10(255.0 * 255.0 * static_cast<double>(ref.size()) / sse);
}

namespace detail {

/// Normalized 1-D Gaussian, radius 5, sigma 1.5.
inline Vector ssim_kernel() {
  Vector k(11);
  for (int i = 0; i < 11; ++i) {
    const double x = i - 5;
    k(i) = std::exp(-x * x / (2.0 * 1.5 * 1.5));
  }
  return k / k.sum();
}

/// Valid-region separable filtering with kernel k along rows and columns.
inline Matrix filter_valid(const Matrix& m, const Vector& k) {
  const Index n = k.size();
  const Index rows = m.rows() - n + 1;
  const Index cols = m.cols() - n + 1;
  Matrix tmp(rows, m.cols());
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = 0; r < rows; ++r) tmp(r, c) = m.col(c).segment(r, n).dot(k);
  Matrix out(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) out(r, c) = tmp.row(r).segment(c, n).dot(k.transpose());
  return out;
}

}  // namespace detail

/// Mean SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// L = 255, valid windows only.
inline double ssim(const GrayImage& ref, const GrayImage& test) {
  require(ref.height() == test.height() && ref.width() == test.width(),
          "ssim: image dimensions differ");
  if (ref.height() < 11 || ref.width() < 11) throw Error("ssim: image smaller than 11x11");
  constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  const Vector k = detail::ssim_kernel();
  const Matrix& x = ref.pixels();
  const Matrix& y = test.pixels();
  const Matrix mx = detail::filter_valid(x, k);
  const Matrix my = detail::filter_valid(y, k);
  const Matrix sxx = detail::filter_valid(x.cwiseProduct(x), k) - mx.cwiseProduct(mx);
  const Matrix syy = detail::filter_valid(y.cwiseProduct(y), k) - my.cwiseProduct(my);
  const Matrix sxy = detail::filter_valid(x.cwiseProduct(y), k) - mx.cwiseProduct(my);
  const auto num = (2.0 * mx.cwiseProduct(my).array() + c1) * (2.0 * sxy.array() + c2);
  const auto den = (mx.array().square() + my.array().square() + c1) *
                   (sxx.array() + syy.array() + c2);
  return (num / den).mean();
}

/// Adds i.i.d. N(0, sigma^2) noise drawn from std::mt19937_64(seed), row by
/// row. No clipping.
inline GrayImage add_gaussian_noise(const GrayImage& img, double sigma, std::uint64_t seed) {
  require(sigma >= 0.0, "add_gaussian_noise: sigma must be nonnegative");
  GrayImage out = img;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (Index r = 0; r < img.height(); ++r)
    for (Index c = 0; c < img.width(); ++c) out(r, c) += noise(rng);
  return out;
}

/// Overcomplete DCT: column j samples cos(pi j (i + 1/2) / k); columns j >= 1
/// have their mean removed; every column is normalized.
inline ObliquePoint odct_dictionary(Index n, Index k) {
  require(n >= 1, "odct_dictionary: n must be positive");
  if (k < n) throw Error("odct_dictionary: k must be at least n");
  Matrix d(n, k);
  for (Index j = 0; j < k; ++j) {
    for (Index i = 0; i < n; ++i) {
      d(i, j) = std::cos(std::numbers::pi * static_cast<double>(j) *
                         (static_cast<double>(i) + 0.5) / static_cast<double>(k));
    }
    if (j >= 1) d.col(j).array() -= d.col(j).mean();
  }
  return normalize_columns(d);
}

/// Explicit B kron A, i.e. the unstructured dictionary equivalent to (A, B).
inline Matrix kronecker(const Matrix& b, const Matrix& a) {
  Matrix out(b.rows() * a.rows(), b.cols() * a.cols());
  for (Index j = 0; j < b.cols(); ++j)
    for (Index i = 0; i < b.rows(); ++i)
      out.block(i * a.rows(), j * a.cols(), a.rows(), a.cols()) = b(i, j) * a;
  return out;
}

/// Spatial patch size covered by a dictionary pair. A pair with B = [1]
/// (unstructured layout) whose A has a square number of rows n*n covers
/// n x n patches vectorized column by column; otherwise A.rows() x B.rows().
inline std::pair<Index, Index> patch_shape(const ObliquePoint& a, const ObliquePoint& b) {
  if (b.rows() == 1 && b.cols() == 1) {
    const auto side = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(a.rows()))));
    if (side * side == a.rows()) return {side, side};
  }
  return {a.rows(), b.rows()};
}

struct DenoiseOptions {
  FistaConfig fista{};
  Index chunk = 4096;  // patches solved per batch
};

/// Fit weight handed to the solver for a noise level sigma (pixel units).
/// The regularization parameter lambda_d = sigma / 100 weighs the l1 term of
/// a problem posed on intensities in [0, 1]:
///   min lambda_d ||X||_1 + ||A X B^T - S/255||^2,
/// which on the pixel scale is ||X'||_1 + 1/(255 lambda_d) ||A X' B^T - S||^2.
inline double denoise_fit_weight(double sigma) {
  require(sigma > 0.0, "denoise: sigma must be positive");
  return 1.0 / (255.0 * (sigma / 100.0));
}

/// Sparse codes every overlapping patch (DC removed, restored afterwards)
/// over (A, B) and averages the overlapping reconstructions.
inline GrayImage denoise_image(const GrayImage& img, const ObliquePoint& a,
                               const ObliquePoint& b, double sigma,
                               const DenoiseOptions& opt = {}) {
  const double fit = denoise_fit_weight(sigma);
  const auto [ph, pw] = patch_shape(a, b);
  detail::require_patch_fits(img, ph, pw);
  require(opt.chunk >= 1, "denoise: chunk must be positive");
  const Index rows = img.height() - ph + 1;
  const Index cols = img.width() - pw + 1;
  const Index total = rows * cols;
  const Index len = ph * pw;

  FistaConfig fcfg = opt.fista;
  if (!fcfg.step) fcfg.step = 1.0 / lipschitz_bound(a, b, fit);
  const SeparableOperator op(a.matrix(), b.matrix());

  Matrix sum = Matrix::Zero(img.height(), img.width());
  Matrix cover = Matrix::Zero(img.height(), img.width());
  for (Index start = 0; start < total; start += opt.chunk) {
    const Index n = std::min(opt.chunk, total - start);
    Matrix s(len, n);
    Eigen::RowVectorXd dc(n);
    for (Index k = 0; k < n; ++k) {
      const Index r = (start + k) / cols;
      const Index c = (start + k) % cols;
      Eigen::Map<Matrix>(s.col(k).data(), ph, pw) = img.pixels().block(r, c, ph, pw);
      dc(k) = s.col(k).mean();
      s.col(k).array() -= dc(k);
    }
    const auto sol = fista_solve_batch(a, b, s, fit, nullptr, fcfg);
    Matrix rec = op.apply(sol.x);
    for (Index k = 0; k < n; ++k) {
      const Index r = (start + k) / cols;
      const Index c = (start + k) % cols;
      rec.col(k).array() += dc(k);
      sum.block(r, c, ph, pw) += Eigen::Map<const Matrix>(rec.col(k).data(), ph, pw);
      cover.block(r, c, ph, pw).array() += 1.0;
    }
  }
  return GrayImage(sum.cwiseQuotient(cover));
}

struct InpaintOptions {
  FistaConfig fista{};
  Index chunk = 4096;
};

/// Fills unobserved pixels (mask false) from a masked sparse code over
/// (A, B). When the dictionary covers the whole image a single problem is
/// solved; otherwise every overlapping patch with a strict majority of
/// observed pixels is coded after removing the mean of its observed pixels,
/// and reconstructions are averaged (patches with any observed pixel fill
/// what the majority patches miss). Observed pixels are copied from the input.
inline GrayImage inpaint_image(const GrayImage& img, const Mask& mask, const ObliquePoint& a,
                               const ObliquePoint& b, double lambda_d,
                               const InpaintOptions& opt = {}) {
  require(mask.rows() == img.height() && mask.cols() == img.width(),
          "inpaint: mask dimensions differ from image");
  require(mask.any(), "inpaint: mask has no observed pixel");
  require(lambda_d > 0.0, "inpaint: lambda_d must be positive");
  require(opt.chunk >= 1, "inpaint: chunk must be positive");
  const auto [ph, pw] = patch_shape(a, b);
  detail::require_patch_fits(img, ph, pw);
  const SeparableOperator op(a.matrix(), b.matrix());
  FistaConfig fcfg = opt.fista;
  if (!fcfg.step) fcfg.step = 1.0 / lipschitz_bound(a, b, lambda_d);

  GrayImage out = img;
  if (ph == img.height() && pw == img.width()) {
    const Matrix s = img.pixels().reshaped();
    const Matrix mk = mask.cast<double>().reshaped();
    const auto sol = fista_solve_batch(a, b, s, lambda_d, &mk, fcfg);
    const Matrix rec = op.apply(sol.x).reshaped(ph, pw);
    for (Index c = 0; c < img.width(); ++c)
      for (Index r = 0; r < img.height(); ++r)
        if (!mask(r, c)) out(r, c) = rec(r, c);
    return out;
  }

  const Index rows = img.height() - ph + 1;
  const Index cols = img.width() - pw + 1;
  const Index len = ph * pw;
  // Tier 0: observed majority; tier 1: any observed pixel.
  std::vector<std::pair<Index, int>> selected;
  for (Index k = 0; k < rows * cols; ++k) {
    const Index r = k / cols;
    const Index c = k % cols;
    const auto seen = mask.block(r, c, ph, pw).count();
    if (2 * seen > len) selected.push_back({k, 0});
    else if (seen > 0) selected.push_back({k, 1});
  }
  Matrix sum[2] = {Matrix::Zero(img.height(), img.width()), Matrix::Zero(img.height(), img.width())};
  Matrix cover[2] = {sum[0], sum[0]};
  const auto total = static_cast<Index>(selected.size());
  for (Index start = 0; start < total; start += opt.chunk) {
    const Index n = std::min(opt.chunk, total - start);
    Matrix s(len, n);
    Matrix mk(len, n);
    Eigen::RowVectorXd dc(n);
    for (Index q = 0; q < n; ++q) {
      const Index k = selected[static_cast<std::size_t>(start + q)].first;
      const Index r = k / cols;
      const Index c = k % cols;
      Eigen::Map<Matrix>(s.col(q).data(), ph, pw) = img.pixels().block(r, c, ph, pw);
      Eigen::Map<Matrix>(mk.col(q).data(), ph, pw) = mask.block(r, c, ph, pw).cast<double>();
      dc(q) = s.col(q).cwiseProduct(mk.col(q)).sum() / mk.col(q).sum();
      s.col(q) = ((s.col(q).array() - dc(q)) * mk.col(q).array()).matrix();
    }
    const auto sol = fista_solve_batch(a, b, s, lambda_d, &mk, fcfg);
    Matrix rec = op.apply(sol.x);
    for (Index q = 0; q < n; ++q) {
      const auto [k, tier] = selected[static_cast<std::size_t>(start + q)];
      const Index r = k / cols;
      const Index c = k % cols;
      rec.col(q).array() += dc(q);
      sum[tier].block(r, c, ph, pw) += Eigen::Map<const Matrix>(rec.col(q).data(), ph, pw);
      cover[tier].block(r, c, ph, pw).array() += 1.0;
    }
  }
  const double fallback = img.pixels().cwiseProduct(mask.cast<double>()).sum() /
                          static_cast<double>(mask.count());
  for (Index c = 0; c < img.width(); ++c) {
    for (Index r = 0; r < img.height(); ++r) {
      if (mask(r, c)) continue;
      if (cover[0](r, c) > 0.0) out(r, c) = sum[0](r, c) / cover[0](r, c);
      else if (cover[1](r, c) > 0.0) out(r, c) = sum[1](r, c) / cover[1](r, c);
      else out(r, c) = fallback;
    }
  }
  return out;
}

}  // namespace sepdict
