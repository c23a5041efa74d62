#pragma once

// Command implementations behind the `sepdict` executable. Each command writes
// results to `out`, diagnostics to `log`, and returns a process exit code:
// 0 success, 1 numerical/internal failure, 2 usage or input error.

#include <sepdict/sepdict.hpp>

#include <cinttypes>
#include <cstdio>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace sepdict::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

struct TrainSpec {
  std::vector<std::string> inputs;
  Index patch_h = 8;
  Index patch_w = 8;
  Index atoms_a = 16;
  Index atoms_b = 16;
  std::size_t patches = 40000;
  double rho = 100.0;
  std::optional<double> lambda;  // default 0.1 / (a b)
  std::optional<double> kappa;   // default 0.1 / (a b)
  double grad_tol = 1e-4;
  int max_iter = 600;
  std::uint64_t seed = 0;
  bool unstructured = false;
  std::string output;
};

/// Dictionary shape (h, w, a, b) implied by a TrainSpec. Unstructured mode
/// folds the patch into a column: h = patch_h * patch_w, w = b = 1.
struct DictShape {
  Index h, w, a, b;
};

inline DictShape dictionary_shape(const TrainSpec& spec) {
  if (spec.unstructured) return {spec.patch_h * spec.patch_w, 1, spec.atoms_a, 1};
  return {spec.patch_h, spec.patch_w, spec.atoms_a, spec.atoms_b};
}

inline ModelParams resolve_params(const TrainSpec& spec) {
  const DictShape s = dictionary_shape(spec);
  const double fallback = 0.1 / static_cast<double>(s.a * s.b);
  return {spec.rho, spec.lambda.value_or(fallback), spec.kappa.value_or(fallback)};
}

/// Normalized training set and random initial dictionaries for a spec.
struct TrainSetup {
  TrainingSet samples;
  ObliquePoint a0;
  ObliquePoint b0;
  std::size_t skipped = 0;
};

inline TrainSetup prepare_training(const TrainSpec& spec, const std::vector<GrayImage>& images) {
  const DictShape s = dictionary_shape(spec);
  if (!spec.unstructured) {
    require(s.a >= s.h && s.b >= s.w, "train: atoms must be at least the patch size per factor");
  } else {
    require(s.a >= s.h, "train: atoms must be at least the patch length");
  }
  require(spec.patches >= 1, "train: need at least one patch");
  auto raw = extract_random_patches(images, spec.patch_h, spec.patch_w, spec.patches, spec.seed);
  auto norm = normalize_training_patches(raw);
  require(norm.set.count() >= 1, "train: every sampled patch is constant");
  TrainSetup out;
  out.skipped = norm.skipped;
  // Unstructured mode reads each column-major patch as an h x 1 sample.
  out.samples = MatrixStack(norm.set.patches.data().reshaped(s.h, s.w * norm.set.count()), s.w);
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  out.a0 = random_oblique(s.h, s.a, rng);
  out.b0 = s.b == 1 && s.w == 1 ? ObliquePoint::from_unit_columns(Matrix::Ones(1, 1))
                                : random_oblique(s.w, s.b, rng);
  return out;
}

inline int cmd_train(const TrainSpec& spec, std::ostream& out, std::ostream& log) {
  try {
    require(!spec.inputs.empty(), "train: no input images");
    require(!spec.output.empty(), "train: no output path");
    std::vector<GrayImage> images;
    for (const auto& p : spec.inputs) images.push_back(read_pgm(p));
    const ModelParams params = resolve_params(spec);
    const DictShape s = dictionary_shape(spec);
    log << "train: h=" << s.h << " w=" << s.w << " a=" << s.a << " b=" << s.b
        << " m=" << spec.patches << " rho=" << params.rho << " lambda=" << params.lambda
        << " kappa=" << params.kappa << " seed=" << spec.seed << '\n';
    TrainSetup setup = prepare_training(spec, images);
    if (setup.skipped > 0) log << "train: skipped " << setup.skipped << " constant patches\n";

    CgConfig cfg;
    cfg.grad_tol = spec.grad_tol;
    cfg.max_iter = spec.max_iter;
    cfg.seed = spec.seed;
    auto progress = [&log](const IterationInfo& it) {
      if (it.iteration % 25 == 0) {
        log << "iter " << it.iteration << " f=" << std::setprecision(10) << it.cost
            << " |G|=" << it.grad_norm << " alpha=" << it.alpha << '\n';
      }
    };
    const auto result = learn_dictionary(setup.samples, setup.a0, setup.b0, params, LineSearchParams{}, cfg, progress);
    write_dictionary(spec.output, result.dict);
    const auto& r = result.report;
    out << "iterations=" << r.iterations << '\n'
        << "final_cost=" << std::setprecision(10) << r.final_cost << '\n'
        << "final_grad_norm=" << r.final_grad_norm << '\n'
        << "converged=" << (r.converged ? "true" : "false") << '\n';
    return kOk;
  } catch (const NumericalError& e) {
    log << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kUsage;
  }
}

inline void print_metrics(std::ostream& out, const GrayImage& ref, const GrayImage& test) {
  const double p = psnr(ref, test);
  char line[64];
  if (std::isinf(p)) std::snprintf(line, sizeof line, "PSNR=inf");
  else std::snprintf(line, sizeof line, "PSNR=%.2f", p);
  out << line;
  if (ref.height() >= 11 && ref.width() >= 11) {
    std::snprintf(line, sizeof line, " SSIM=%.4f", ssim(ref, test));
    out << line;
  }
  out << '\n';
}

struct DenoiseSpec {
  std::string dict;
  std::string input;
  std::string output;
  double sigma = 20.0;
  std::optional<std::string> reference;
};

inline int cmd_denoise(const DenoiseSpec& spec, std::ostream& out, std::ostream& log) {
  try {
    const DictionaryPair d = read_dictionary(spec.dict);
    const GrayImage noisy = read_pgm(spec.input);
    std::optional<GrayImage> ref;
    if (spec.reference) ref = read_pgm(*spec.reference);
    require(spec.sigma > 0.0, "denoise: sigma must be positive");
    log << "denoise: sigma=" << spec.sigma << " lambda_d=" << spec.sigma / 100.0 << '\n';
    const GrayImage clean = denoise_image(noisy, d.a, d.b, spec.sigma);
    write_pgm(spec.output, clean);
    if (ref) print_metrics(out, *ref, clean);
    return kOk;
  } catch (const NumericalError& e) {
    log << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kUsage;
  }
}

struct InpaintSpec {
  std::string dict;
  std::string input;
  std::string mask;
  std::string output;
  double lambda_d = 1.0;
  std::optional<std::string> reference;
};

/// Mask pixels >= 128 are observed.
inline Mask mask_from_image(const GrayImage& img) {
  return (img.pixels().array() >= 128.0).matrix();
}

inline int cmd_inpaint(const InpaintSpec& spec, std::ostream& out, std::ostream& log) {
  try {
    const DictionaryPair d = read_dictionary(spec.dict);
    const GrayImage img = read_pgm(spec.input);
    const GrayImage mimg = read_pgm(spec.mask);
    if (mimg.height() != img.height() || mimg.width() != img.width()) {
      throw Error("inpaint: mask is " + std::to_string(mimg.height()) + "x" +
                  std::to_string(mimg.width()) + " but image is " + std::to_string(img.height()) +
                  "x" + std::to_string(img.width()));
    }
    const Mask mask = mask_from_image(mimg);
    log << "inpaint: lambda_d=" << spec.lambda_d << " missing=" << mask.size() - mask.count() << '\n';
    const GrayImage filled = inpaint_image(img, mask, d.a, d.b, spec.lambda_d);
    write_pgm(spec.output, filled);
    if (spec.reference) print_metrics(out, read_pgm(*spec.reference), filled);
    return kOk;
  } catch (const NumericalError& e) {
    log << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kUsage;
  }
}

struct InspectSpec {
  std::string dict;
  std::optional<std::string> mosaic;
};

inline std::string format_value(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline int cmd_inspect(const InspectSpec& spec, std::ostream& out, std::ostream& log) {
  try {
    const DictionaryPair d = read_dictionary(spec.dict);
    out << "h=" << d.a.rows() << " w=" << d.b.rows() << " a=" << d.a.cols() << " b=" << d.b.cols() << '\n';
    auto mu_or_na = [](const ObliquePoint& p) {
      return p.cols() >= 2 ? format_value(mutual_coherence_mu(p)) : std::string("n/a");
    };
    out << "mu(A)=" << mu_or_na(d.a) << '\n' << "mu(B)=" << mu_or_na(d.b) << '\n';
    if (d.a.cols() * d.b.cols() >= 2) out << "mu(BxA)=" << format_value(kron_coherence(d.a, d.b)) << '\n';
    out << "r(A)=" << format_value(coherence_r(d.a)) << '\n'
        << "r(B)=" << format_value(coherence_r(d.b)) << '\n';
    if (spec.mosaic) {
      const Mosaic m = atom_mosaic(d);
      write_pgm(*spec.mosaic, m.image);
      out << "tiles=" << m.tiles << '\n';
    }
    return kOk;
  } catch (const NumericalError& e) {
    log << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kUsage;
  }
}

inline int cmd_metrics(const std::string& ref_path, const std::string& test_path, std::ostream& out,
                       std::ostream& log) {
  try {
    const GrayImage ref = read_pgm(ref_path);
    const GrayImage test = read_pgm(test_path);
    if (ref.height() != test.height() || ref.width() != test.width()) {
      throw Error("metrics: image dimensions differ");
    }
    const double p = psnr(ref, test);
    char line[64];
    if (std::isinf(p)) std::snprintf(line, sizeof line, "PSNR=inf\n");
    else std::snprintf(line, sizeof line, "PSNR=%.2f\n", p);
    out << line;
    if (ref.height() >= 11 && ref.width() >= 11) {
      std::snprintf(line, sizeof line, "SSIM=%.4f\n", ssim(ref, test));
    } else {
      std::snprintf(line, sizeof line, "SSIM=n/a\n");
    }
    out << line;
    return kOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kUsage;
  }
}

/// Writes a separable ODCT pair (A = odct(h, a), B = odct(w, b)), or with
/// `unstructured` the explicit B kron A as a single factor with B = [1].
inline int cmd_odct(Index h, Index w, Index a, Index b, bool unstructured, const std::string& output,
                    std::ostream& log) {
  try {
    ObliquePoint fa = odct_dictionary(h, a);
    ObliquePoint fb = odct_dictionary(w, b);
    DictionaryPair d{fa, fb};
    if (unstructured) {
      d = {ObliquePoint::from_unit_columns(kronecker(fb.matrix(), fa.matrix())),
           ObliquePoint::from_unit_columns(Matrix::Ones(1, 1))};
    }
    write_dictionary(output, d);
    return kOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kUsage;
  }
}

inline int cmd_noise(const std::string& input, double sigma, std::uint64_t seed, const std::string& output,
                     std::ostream& log) {
  try {
    write_pgm(output, add_gaussian_noise(read_pgm(input), sigma, seed));
    return kOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace sepdict::cli
