#include <sepdict/cli.hpp>

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace sepdict::cli;
  CLI::App app{"Separable dictionary learning, denoising and inpainting"};
  app.require_subcommand(1);

  TrainSpec train;
  auto* train_cmd = app.add_subcommand("train", "Learn a dictionary from random training patches");
  train_cmd->add_option("-i,--input", train.inputs, "Training images (PGM)")->required();
  train_cmd->add_option("-o,--output", train.output, "Dictionary file to write")->required();
  train_cmd->add_option("--patch-h", train.patch_h, "Patch height")->capture_default_str();
  train_cmd->add_option("--patch-w", train.patch_w, "Patch width")->capture_default_str();
  train_cmd->add_option("--atoms-a", train.atoms_a, "Columns of A")->capture_default_str();
  train_cmd->add_option("--atoms-b", train.atoms_b, "Columns of B (ignored when unstructured)")
      ->capture_default_str();
  train_cmd->add_option("-m,--patches", train.patches, "Number of training patches")->capture_default_str();
  train_cmd->add_option("--rho", train.rho, "Sparsity weighting")->capture_default_str();
  train_cmd->add_option("--lambda", train.lambda, "Sparsity/fit trade-off (default 0.1/(a*b))");
  train_cmd->add_option("--kappa", train.kappa, "Coherence weight (default 0.1/(a*b))");
  train_cmd->add_option("--grad-tol", train.grad_tol, "Gradient norm stop")->capture_default_str();
  train_cmd->add_option("--max-iter", train.max_iter, "Iteration limit")->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "Random seed")->capture_default_str();
  train_cmd->add_flag("--unstructured", train.unstructured, "Learn D = 1 kron A on vectorized patches");

  DenoiseSpec denoise;
  auto* denoise_cmd = app.add_subcommand("denoise", "Denoise an image with a dictionary");
  denoise_cmd->add_option("-d,--dict", denoise.dict, "Dictionary file")->required();
  denoise_cmd->add_option("-i,--input", denoise.input, "Noisy image (PGM)")->required();
  denoise_cmd->add_option("-o,--output", denoise.output, "Output image (PGM)")->required();
  denoise_cmd->add_option("-s,--sigma", denoise.sigma, "Noise standard deviation")->capture_default_str();
  denoise_cmd->add_option("-r,--reference", denoise.reference, "Clean image for PSNR/SSIM");

  InpaintSpec inpaint;
  auto* inpaint_cmd = app.add_subcommand("inpaint", "Fill missing pixels given a mask");
  inpaint_cmd->add_option("-d,--dict", inpaint.dict, "Dictionary file")->required();
  inpaint_cmd->add_option("-i,--input", inpaint.input, "Image (PGM)")->required();
  inpaint_cmd->add_option("-k,--mask", inpaint.mask, "Mask (PGM, 0 = missing, 255 = observed)")->required();
  inpaint_cmd->add_option("-o,--output", inpaint.output, "Output image (PGM)")->required();
  inpaint_cmd->add_option("-l,--lambda-d", inpaint.lambda_d, "Fit weight")->capture_default_str();
  inpaint_cmd->add_option("-r,--reference", inpaint.reference, "Ground truth for PSNR/SSIM");

  InspectSpec inspect;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print coherence figures of a dictionary");
  inspect_cmd->add_option("dict", inspect.dict, "Dictionary file")->required();
  inspect_cmd->add_option("--mosaic", inspect.mosaic, "Write an atom mosaic (PGM)");

  std::string ref_path;
  std::string test_path;
  auto* metrics_cmd = app.add_subcommand("metrics", "PSNR and SSIM between two images");
  metrics_cmd->add_option("reference", ref_path, "Reference image")->required();
  metrics_cmd->add_option("test", test_path, "Test image")->required();

  sepdict::Index oh = 8, ow = 8, oa = 16, ob = 16;
  bool odct_unstructured = false;
  std::string odct_out;
  auto* odct_cmd = app.add_subcommand("odct", "Write an overcomplete DCT dictionary");
  odct_cmd->add_option("-o,--output", odct_out, "Dictionary file")->required();
  odct_cmd->add_option("--patch-h", oh)->capture_default_str();
  odct_cmd->add_option("--patch-w", ow)->capture_default_str();
  odct_cmd->add_option("--atoms-a", oa)->capture_default_str();
  odct_cmd->add_option("--atoms-b", ob)->capture_default_str();
  odct_cmd->add_flag("--unstructured", odct_unstructured, "Store B kron A as a single factor");

  std::string noise_in;
  std::string noise_out;
  double noise_sigma = 20.0;
  std::uint64_t noise_seed = 0;
  auto* noise_cmd = app.add_subcommand("noise", "Add white Gaussian noise (8-bit output)");
  noise_cmd->add_option("-i,--input", noise_in)->required();
  noise_cmd->add_option("-o,--output", noise_out)->required();
  noise_cmd->add_option("-s,--sigma", noise_sigma)->capture_default_str();
  noise_cmd->add_option("--seed", noise_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (*train_cmd) return cmd_train(train, std::cout, std::cerr);
  if (*denoise_cmd) return cmd_denoise(denoise, std::cout, std::cerr);
  if (*inpaint_cmd) return cmd_inpaint(inpaint, std::cout, std::cerr);
  if (*inspect_cmd) return cmd_inspect(inspect, std::cout, std::cerr);
  if (*metrics_cmd) return cmd_metrics(ref_path, test_path, std::cout, std::cerr);
  if (*odct_cmd) return cmd_odct(oh, ow, oa, ob, odct_unstructured, odct_out, std::cerr);
  if (*noise_cmd) return cmd_noise(noise_in, noise_sigma, noise_seed, noise_out, std::cerr);
  return kUsage;
}
