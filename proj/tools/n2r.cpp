// n2r: dataset synthesis, training, evaluation and reporting.
#include "n2r/harness.hpp"
#include "n2r/nn/gradcheck.hpp"
#include "n2r/wavelet_cs.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace n2r;
namespace fs = std::filesystem;

namespace {

enum Exit : int
{
  kOk = 0,
  kConfig = 2,
  kNumerical = 3,
};

struct Overrides
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  std::optional<std::string> method;
  std::optional<int> k;
  std::optional<std::string> sigma_range;
  std::optional<std::string> ratio;
  std::optional<double> lambda;
  std::optional<double> accel;
  std::optional<long> steps;
};

harness::ExperimentConfig resolve(Overrides const &o)
{
  harness::ExperimentConfig c;
  if (!o.config.empty()) { c = harness::load_config(o.config); }
  if (o.seed) {
    c.data.seed = *o.seed;
    c.train.seed = *o.seed;
  }
  if (o.method) { c.train.method = train::parse_method(*o.method); }
  if (o.k) { c.train.k_supervised = *o.k; }
  if (o.sigma_range) { c.train.noise_range = harness::parse_sigma_range(*o.sigma_range); }
  if (o.ratio) { std::tie(c.train.ratio_sup, c.train.ratio_unsup) = harness::parse_ratio(*o.ratio); }
  if (o.lambda) {
    c.train.lambda_cons = *o.lambda;
    c.eval.cs_lambda = *o.lambda;
  }
  if (o.steps) { c.train.steps = *o.steps; }
  c.train.validate();
  return c;
}

fs::path require_out(Overrides const &o, char const *cmd)
{
  if (o.out.empty()) { throw ConfigError(fmt::format("{}: --out is required", cmd)); }
  return o.out;
}

int selftest()
{
  int failed = 0;
  auto line = [&](bool ok, std::string const &what) {
    fmt::print("{} {}\n", ok ? "PASS" : "FAIL", what);
    failed += ok ? 0 : 1;
  };

  Rng rng(1);
  auto random_image = [&](int n) {
    ComplexImage x(n, n);
    for (auto &v : x.data()) {
      v = {rng.normal(), rng.normal()};
    }
    return x;
  };

  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    int const nc = 1 + t % 4;
    auto const sens = make_coil_sensitivities(16, 16, nc, 100 + t);
    auto const mask = make_poisson_disc_mask(16, 16, 3.0, 4, 200 + t);
    auto const x = random_image(16);
    std::vector<Complex> zd(static_cast<std::size_t>(nc) * 256);
    for (auto &v : zd) {
      v = {rng.normal(), rng.normal()};
    }
    KSpace const z(nc, mask, zd);
    auto const ax = forward_model(x, sens, mask);
    auto const lhs = inner_product(ax.data(), z.data());
    auto const rhs = inner_product(x.data(), adjoint_sense(z, sens).data());
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-30));
  }
  line(worst < 1e-5, fmt::format("adjoint <Ax,z> = <x,A^H z> (max rel {:.2e})", worst));

  auto const x = random_image(32);
  auto const rt = ifft2c(fft2c(x));
  double fft_err = 0.0, dwt_err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    fft_err = std::max(fft_err, std::abs(rt.data()[i] - x.data()[i]));
  }
  line(fft_err < 1e-6, fmt::format("fft2c round trip (max abs {:.2e})", fft_err));

  auto const pr = idwt2(dwt2(x, 3));
  for (std::size_t i = 0; i < x.size(); ++i) {
    dwt_err = std::max(dwt_err, std::abs(pr.data()[i] - x.data()[i]));
  }
  line(dwt_err < 1e-6, fmt::format("dwt2 perfect reconstruction (max abs {:.2e})", dwt_err));

  auto const ph = make_phantom(32, 32, 3);
  line(metrics::ssim(ph, ph) == 1.0 && metrics::nrmse(ph, ph) == 0.0, "ssim(x,x) = 1, nrmse(x,x) = 0");
  line(cs_lambda_schedule(12, 0.0) == 0.07 && cs_lambda_schedule(16, 0.0) == 0.06 && cs_lambda_schedule(12, 1.0) == 1.2,
       "cs lambda schedule");
  return failed == 0 ? kOk : kNumerical;
}

int gradcheck(std::uint64_t seed)
{
  int failed = 0;
  for (auto const &r : nn::standard_gradient_checks(seed)) {
    fmt::print("{} {:<24} coords={} max_rel={:.3e}\n", r.passed ? "PASS" : "FAIL", r.name, r.coords, r.max_rel_error);
    failed += r.passed ? 0 : 1;
  }
  return failed == 0 ? kOk : kNumerical;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Noise2Recon desk-scale MRI reconstruction lab"};
  app.require_subcommand(1);
  Overrides o;

  auto common = [&](CLI::App *c) {
    c->add_option("--config", o.config, "INI config file")->check(CLI::ExistingFile);
    c->add_option("--seed", o.seed, "Seed for dataset synthesis and training");
    c->add_option("--out", o.out, "Output directory (file for eval)");
    c->add_flag("--force", o.force, "Overwrite existing outputs");
  };

  std::string data;
  std::vector<std::string> checkpoints, csvs;
  bool with_cs = false, with_zf = false;
  std::string sigma_test, accel_test;

  auto *sim = app.add_subcommand("simulate", "Synthesize the phantom dataset");
  common(sim);
  sim->add_option("--accel", o.accel, "Acceleration of the fixed acquisition masks (R_train)");

  auto *tr = app.add_subcommand("train", "Train one method");
  common(tr);
  tr->add_option("--data", data, "Dataset directory")->required();
  tr->add_option("--method", o.method, "supervised | supervised_aug | noise2recon | denoise_pretrain_finetune");
  tr->add_option("--k", o.k, "Number of supervised scans");
  tr->add_option("--sigma-range", o.sigma_range, "Training noise range LO:HI");
  tr->add_option("--ratio", o.ratio, "Supervised:unsupervised sampling ratio TS:TU");
  tr->add_option("--lambda", o.lambda, "Consistency weight");
  tr->add_option("--accel", o.accel, "Expected R_train (must match the dataset)");
  tr->add_option("--steps", o.steps, "Total optimizer steps");

  auto *ev = app.add_subcommand("eval", "Evaluate checkpoints over a noise/acceleration sweep");
  common(ev);
  ev->add_option("--data", data, "Dataset directory")->required();
  ev->add_option("--checkpoint", checkpoints, "Checkpoint file (repeatable)");
  ev->add_flag("--cs", with_cs, "Include the compressed-sensing baseline");
  ev->add_flag("--zero-filled", with_zf, "Include the zero-filled baseline");
  ev->add_option("--lambda", o.lambda, "CS regularization weight (default: tabulated schedule)");
  ev->add_option("--accel", o.accel, "Single test acceleration");
  ev->add_option("--accel-test", accel_test, "Comma-separated test accelerations");
  ev->add_option("--sigma-test", sigma_test, "Comma-separated test noise levels");

  auto *cs = app.add_subcommand("cs", "Compressed-sensing reconstruction of the test scans");
  common(cs);
  cs->add_option("--data", data, "Dataset directory")->required();
  cs->add_option("--lambda", o.lambda, "Regularization weight (default: tabulated schedule)");
  cs->add_option("--accel", o.accel, "Test acceleration")->required();
  cs->add_option("--sigma-test", sigma_test, "Comma-separated test noise levels");

  auto *rep = app.add_subcommand("report", "Aggregate metric CSVs into mean (std) tables");
  rep->add_option("csv", csvs, "Metric CSV files")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", o.out, "Directory for table.txt and series.csv");

  auto *gc = app.add_subcommand("gradcheck", "Finite-difference checks of every autodiff op and the U-Net");
  gc->add_option("--seed", o.seed, "Seed for the probed coordinates");

  auto *st = app.add_subcommand("selftest", "Quick operator and metric sanity checks");

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const &e) {
    int const rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*sim) {
      auto c = resolve(o);
      if (o.accel) { c.data.accel = *o.accel; }
      auto const out = require_out(o, "simulate");
      harness::simulate(c, out, o.force);
      fmt::print("wrote {} scans to {}\n", harness::make_manifest(c.data).scans.size(), out.string());
    } else if (*tr) {
      auto const c = resolve(o);
      auto const m = harness::load_manifest(data);
      if (o.accel && *o.accel != m.config.accel) {
        throw ConfigError(fmt::format("--accel {} does not match the dataset's R_train {}", *o.accel, m.config.accel));
      }
      auto const res = harness::train(c, data, require_out(o, "train"), o.force);
      if (res.resumed_from > 0) { fmt::print("resumed from step {}\n", res.resumed_from); }
      fmt::print("checkpoint {}\n", res.checkpoint.string());
    } else if (*ev) {
      auto c = resolve(o);
      if (!sigma_test.empty()) { c.eval.sigma_test = harness::parse_list(sigma_test); }
      if (!accel_test.empty()) { c.eval.accel_test = harness::parse_list(accel_test); }
      if (o.accel) { c.eval.accel_test = {*o.accel}; }
      auto const m = harness::load_manifest(data);
      std::vector<harness::Reconstructor> recons;
      for (auto const &p : checkpoints) {
        recons.push_back(harness::model_reconstructor(p));
      }
      if (with_cs) { recons.push_back(harness::cs_reconstructor(c.eval, m.config.accel)); }
      if (with_zf) { recons.push_back(harness::zero_filled_reconstructor()); }
      if (recons.empty()) { throw ConfigError("eval: give at least one --checkpoint, --cs or --zero-filled"); }
      auto const rows = harness::evaluate(data, c.eval, recons);
      if (o.out.empty()) {
        metrics::write_csv(std::cout, rows);
      } else {
        fs::path const out = o.out;
        if (fs::exists(out) && !o.force) { throw ConfigError(out.string() + " exists; pass --force to overwrite"); }
        if (out.has_parent_path()) { fs::create_directories(out.parent_path()); }
        harness::write_metrics(out, rows);
        fmt::print("wrote {} rows to {}\n", rows.size(), out.string());
      }
    } else if (*cs) {
      auto c = resolve(o);
      if (!sigma_test.empty()) { c.eval.sigma_test = harness::parse_list(sigma_test); }
      auto const out = require_out(o, "cs");
      if (fs::exists(out / "metrics.csv") && !o.force) {
        throw ConfigError(out.string() + " already holds results; pass --force to overwrite");
      }
      auto const rows = harness::run_cs(data, c.eval, *o.accel, out);
      fmt::print("wrote {} reconstructions to {}\n", rows.size(), out.string());
    } else if (*rep) {
      std::vector<fs::path> paths(csvs.begin(), csvs.end());
      std::cout << harness::report(paths, o.out);
    } else if (*gc) {
      return gradcheck(o.seed.value_or(0));
    } else if (*st) {
      return selftest();
    }
  } catch (NumericalError const &e) {
    fmt::print(stderr, "numerical error: {}\n", e.what());
    return kNumerical;
  } catch (Error const &e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kConfig;
  } catch (std::filesystem::filesystem_error const &e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kConfig;
  }
  return kOk;
}
