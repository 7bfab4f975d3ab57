#include "n2r/training.hpp"
#include "support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

using namespace n2r;
using namespace n2r::train;
using Catch::Approx;

namespace {

Example make_example(int scan, int slice, int n, bool supervised, double accel = 4.0, int calib = 4)
{
  auto const x = make_phantom(n, n, derive_seed(42, {static_cast<std::uint64_t>(scan), static_cast<std::uint64_t>(slice)}));
  auto const s = make_coil_sensitivities(n, n, 4, static_cast<std::uint64_t>(scan));
  auto const fixed = make_poisson_disc_mask(n, n, accel, calib, 1000 + scan);
  if (supervised) { return {forward_model(x, s, SamplingMask::full(n, n)), s, x, fixed, scan, slice}; }
  return {forward_model(x, s, fixed), s, std::nullopt, fixed, scan, slice};
}

Datasets small_data(int n, int nsup, int nunsup, int slices = 2)
{
  Datasets d;
  for (int sc = 0; sc < nsup; ++sc) {
    for (int sl = 0; sl < slices; ++sl) {
      d.sup.push_back(make_example(sc, sl, n, true));
    }
  }
  for (int sc = nsup; sc < nsup + nunsup; ++sc) {
    for (int sl = 0; sl < slices; ++sl) {
      d.unsup.push_back(make_example(sc, sl, n, false));
    }
  }
  for (int sl = 0; sl < slices; ++sl) {
    d.val.push_back(make_example(90, sl, n, true));
  }
  return d;
}

TrainConfig tiny_config(Method m, long steps)
{
  TrainConfig c;
  c.method = m;
  c.steps = steps;
  c.seed = 7;
  c.mask = {3.0, 4};
  c.net.depth = 1;
  c.net.base_channels = 4;
  c.val_every = 5;
  return c;
}

Model const identity = [](Tensor<float> const &x) { return x; };

bool same_params(nn::ModelParams<float> const &a, nn::ModelParams<float> const &b)
{
  for (auto const &n : a.names()) {
    auto const x = a.at(n).data(), y = b.at(n).data();
    if (!std::equal(x.begin(), x.end(), y.begin(), y.end())) { return false; }
  }
  return true;
}

} // namespace

TEST_CASE("tensor conversion", "[training]")
{
  auto const x = test::random_image(8, 16, 1);
  auto const t = to_tensor(x);
  REQUIRE(t.shape() == nn::Shape{2, 8, 16});
  CHECK(t.data()[0] == static_cast<float>(x.data()[0].real()));
  CHECK(t.data()[128] == static_cast<float>(x.data()[0].imag()));
  auto const back = to_image(t);
  CHECK(test::max_abs_diff(back.data(), x.data()) < 1e-6);
}

TEST_CASE("supervised step", "[training][supervised]")
{
  auto const ex = make_example(0, 0, 32, true);
  SECTION("identity network with a fully sampled input has zero loss")
  {
    auto const r = supervised_step(identity, ex, {1.0, 0}, 1);
    CHECK(r.loss < 1e-6);
  }
  SECTION("deterministic given the seed")
  {
    auto p = nn::init_unet<float>({1, 4, 2, 2, 0.2}, 3);
    Model const m = [&](auto const &x) { return nn::unet_forward(p, x); };
    double const a = supervised_step(m, ex, {4.0, 4}, 11).loss;
    p.zero_grad();
    double const b = supervised_step(m, ex, {4.0, 4}, 11).loss;
    CHECK(a == b);
    p.zero_grad();
    CHECK(supervised_step(m, ex, {4.0, 4}, 12).loss != a);
  }
  SECTION("missing target is a usage error")
  {
    CHECK_THROWS_AS(supervised_step(identity, make_example(1, 0, 32, false), {4.0, 4}, 0), UsageError);
  }
  SECTION("overfits a single slice")
  {
    auto p = nn::init_unet<float>({2, 8, 2, 2, 0.2}, 5);
    Model const m = [&](auto const &x) { return nn::unet_forward(p, x); };
    nn::OptimState<float> opt;
    opt.cfg.lr = 3e-3;
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 200; ++i) {
      p.zero_grad();
      double const l = supervised_step(m, ex, {4.0, 4}, derive_seed(1, {static_cast<std::uint64_t>(i)})).loss;
      REQUIRE(l >= 0.0);
      if (i == 0) { first = l; }
      last = l;
      nn::adam_step(p, opt);
    }
    INFO("first " << first << " last " << last);
    CHECK(last < 0.1 * first);
  }
}

TEST_CASE("augmented supervised step", "[training][augment]")
{
  auto p = nn::init_unet<float>({1, 4, 2, 2, 0.2}, 3);
  Model const m = [&](auto const &x) { return nn::unet_forward(p, x); };
  auto const ex = make_example(0, 0, 32, true);
  CHECK(augmented_supervised_step(m, ex, {4.0, 4}, 0.0, {0.2, 0.5}, 9).loss ==
        supervised_step(m, ex, {4.0, 4}, 9).loss);

  auto const small = make_example(0, 0, 16, true, 2.0, 2);
  int applied = 0;
  int const n = 10000;
  for (int i = 0; i < n; ++i) {
    auto const r = augmented_supervised_step(identity, small, {2.0, 2}, 0.2, {0.2, 0.5}, derive_seed(3, {static_cast<std::uint64_t>(i)}));
    if (r.augmented) {
      ++applied;
      REQUIRE(r.sigma >= 0.2);
      REQUIRE(r.sigma < 0.5);
    }
  }
  CHECK(std::abs(static_cast<double>(applied) / n - 0.2) <= 0.02);
}

TEST_CASE("consistency step", "[training][consistency]")
{
  auto p = nn::init_unet<float>({1, 4, 2, 2, 0.2}, 3);
  Model const m = [&](auto const &x) { return nn::unet_forward(p, x); };
  auto const ex = make_example(3, 1, 32, false);

  SECTION("sigma = 0 gives identical branches")
  {
    auto const r = consistency_step(m, ex, {0.2, 0.5}, 1, 1.0, 0.0);
    CHECK(r.loss < 1e-6);
  }
  SECTION("pseudo-label is detached and gradients come from the noisy branch only")
  {
    p.zero_grad();
    auto const r = consistency_step(m, ex, {0.2, 0.5}, 4);
    CHECK(r.sigma >= 0.2);
    CHECK(r.sigma < 0.5);
    CHECK_FALSE(r.target.requires_grad());
    CHECK(r.target.node()->parents.empty());
    CHECK_FALSE(r.target.has_grad());
    std::map<std::string, std::vector<float>> g;
    for (auto const &n : p.names()) {
      g[n] = {p.at(n).grad().begin(), p.at(n).grad().end()};
    }
    // Same loss against a constant copy of the pseudo-label: identical gradients.
    p.zero_grad();
    auto const zf = adjoint_sense(add_masked_noise(ex.kspace, {r.sigma, step_noise_seed(4)}, adjoint_sense(ex.kspace, ex.sens)), ex.sens);
    auto const pred = m(to_tensor(scaled(zf, 1.0 / r.scale)));
    auto const constant = Tensor<float>(r.target.shape(), {r.target.data().begin(), r.target.data().end()});
    nn::backward(nn::complex_l1(pred, constant));
    double worst = 0.0;
    for (auto const &n : p.names()) {
      for (std::size_t i = 0; i < g[n].size(); ++i) {
        worst = std::max(worst, static_cast<double>(std::abs(g[n][i] - p.at(n).grad()[i])));
      }
    }
    CHECK(worst < 1e-6);
  }
  SECTION("weight 0 leaves no gradients")
  {
    p.zero_grad();
    (void)consistency_step(m, ex, {0.2, 0.5}, 4, 0.0);
    for (auto const &n : p.names()) {
      CHECK_FALSE(p.at(n).has_grad());
    }
  }
  SECTION("contract violations")
  {
    CHECK_THROWS_AS(consistency_step(m, make_example(0, 0, 32, true), {0.2, 0.5}, 0), UsageError);
    Example moved = ex;
    moved.fixed_mask = make_poisson_disc_mask(32, 32, 4.0, 4, 77);
    CHECK_THROWS_AS(consistency_step(m, moved, {0.2, 0.5}, 0), UsageError);
  }
}

TEST_CASE("noise stays inside the acquisition mask", "[training][noise]")
{
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto const ex = make_example(static_cast<int>(seed), 0, 32, false, 2.0 + static_cast<double>(seed % 5), 4);
    auto const ref = adjoint_sense(ex.kspace, ex.sens);
    auto const noisy = add_masked_noise(ex.kspace, {0.5 + 0.1 * static_cast<double>(seed), seed}, ref);
    for (int c = 0; c < noisy.ncoils(); ++c) {
      for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
          if (!ex.fixed_mask(y, x)) {
            REQUIRE(noisy(c, y, x) == Complex{});
          } else {
            REQUIRE(noisy(c, y, x) != ex.kspace(c, y, x));
          }
        }
      }
    }
  }
}

TEST_CASE("denoising step", "[training][denoise]")
{
  auto const ex = make_example(0, 0, 32, true);
  CHECK(denoise_step(identity, ex, {3.0, 4}, {0.2, 0.5}, 1, 1.0, 0.0).loss < 1e-6);
  CHECK(denoise_step(identity, make_example(5, 0, 32, false), {3.0, 4}, {0.2, 0.5}, 1, 1.0, 0.0).loss < 1e-6);
  CHECK(denoise_step(identity, ex, {3.0, 4}, {0.2, 0.5}, 1).loss > 1e-3);
}

TEST_CASE("balanced sampler", "[training][sampler]")
{
  SECTION("1:1 alternates strictly")
  {
    BalancedSampler const s(1, 1, 3, 13, 0);
    for (std::uint64_t i = 0; i < 100; ++i) {
      REQUIRE(s.at(i).kind == (i % 2 == 0 ? DrawKind::Supervised : DrawKind::Unsupervised));
    }
  }
  for (auto [ts, tu] : {std::pair{1, 1}, {2, 1}, {1, 2}}) {
    BalancedSampler const s(ts, tu, 1, 13, 5);
    long sup = 0, uns = 0;
    for (std::uint64_t i = 0; i < 1000u * (ts + tu); ++i) {
      (s.at(i).kind == DrawKind::Supervised ? sup : uns) += 1;
    }
    CHECK(sup == 1000L * ts);
    CHECK(uns == 1000L * tu);
  }
  SECTION("each epoch visits every example once and epochs reshuffle")
  {
    ShuffledStream const s(13, 3, 2);
    std::vector<std::size_t> e0, e1;
    for (std::uint64_t j = 0; j < 13; ++j) {
      e0.push_back(s.at(j));
      e1.push_back(s.at(13 + j));
    }
    CHECK(e0 != e1);
    std::sort(e0.begin(), e0.end());
    std::sort(e1.begin(), e1.end());
    for (std::size_t i = 0; i < 13; ++i) {
      REQUIRE(e0[i] == i);
      REQUIRE(e1[i] == i);
    }
    CHECK(ShuffledStream(13, 3, 2).at(20) == s.at(20));
  }
  CHECK_THROWS_AS(BalancedSampler(1, 1, 0, 3, 0), ConfigError);
  CHECK_THROWS_AS(BalancedSampler(0, 1, 2, 3, 0), ConfigError);
}

TEST_CASE("random sampling baseline", "[training][sampler]")
{
  RandomSampler const s(1, 13, 9);
  long sup = 0;
  long const n = 100000;
  for (long i = 0; i < n; ++i) {
    sup += s.at(static_cast<std::uint64_t>(i)).kind == DrawKind::Supervised;
  }
  double const frac = static_cast<double>(sup) / n;
  CHECK(std::abs(frac - 1.0 / 14.0) <= 0.03 / 14.0);
}

TEST_CASE("training configuration", "[training][config]")
{
  CHECK(parse_method("noise2recon") == Method::noise2recon);
  CHECK(to_string(Method::denoise_pretrain_finetune) == "denoise_pretrain_finetune");
  CHECK_THROWS_AS(parse_method("n2r"), ConfigError);
  TrainConfig c;
  CHECK(c.lambda_cons == 0.1);
  CHECK(c.aug_prob == 0.2);
  CHECK(c.noise_range.lo == 0.2);
  CHECK(c.noise_range.hi == 0.5);
  CHECK(c.ratio_sup == 1);
  CHECK(c.ratio_unsup == 1);
  c.steps = 1000;
  CHECK(c.pretrain_steps() == 500);
  c.steps = 1001;
  CHECK(c.pretrain_steps() == 501);
  c.noise_range = {0.5, 0.5};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.noise_range = {0.2, 0.5};
  c.lambda_cons = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("trainer", "[training][trainer]")
{
  auto const data = small_data(32, 1, 3);

  SECTION("noise2recon refuses an empty unsupervised set")
  {
    Datasets d = data;
    d.unsup.clear();
    CHECK_THROWS_AS(Trainer(tiny_config(Method::noise2recon, 4), d), ConfigError);
    CHECK_NOTHROW(Trainer(tiny_config(Method::supervised, 4), d));
  }
  SECTION("lambda = 0 reproduces supervised training on the supervised draws")
  {
    auto c = tiny_config(Method::noise2recon, 20);
    c.lambda_cons = 0.0;
    Trainer a(c, data);
    a.run_all();
    Trainer b(tiny_config(Method::supervised, 10), data);
    b.run_all();
    CHECK(same_params(a.state().params, b.state().params));
    CHECK(a.state().opt.step == 10);
  }
  SECTION("runs are deterministic and losses non-negative")
  {
    for (auto m : {Method::supervised, Method::supervised_aug, Method::noise2recon, Method::denoise_pretrain_finetune}) {
      std::vector<std::string> r1, r2;
      Trainer a(tiny_config(m, 12), data), b(tiny_config(m, 12), data);
      a.run_all([&](LossRow const &r) {
        r1.push_back(format_loss_row(r));
        REQUIRE(r.loss_total >= 0.0);
      });
      b.run_all([&](LossRow const &r) { r2.push_back(format_loss_row(r)); });
      INFO(to_string(m));
      CHECK(r1 == r2);
      CHECK(same_params(a.state().best, b.state().best));
    }
  }
  SECTION("noise2recon history alternates supervised and consistency rows")
  {
    std::vector<LossRow> rows;
    Trainer t(tiny_config(Method::noise2recon, 6), data);
    t.run_all([&](LossRow const &r) { rows.push_back(r); });
    std::vector<LossRow> train_rows;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(train_rows), [](auto const &r) { return r.phase == "train"; });
    REQUIRE(train_rows.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(train_rows[i].loss_sup.has_value() == (i % 2 == 0));
      CHECK(train_rows[i].loss_cons.has_value() == (i % 2 == 1));
      if (train_rows[i].loss_cons) { CHECK(train_rows[i].loss_total == Approx(0.1 * *train_rows[i].loss_cons)); }
    }
    CHECK(format_loss_row(train_rows[0]).find(",train,") != std::string::npos);
  }
  SECTION("denoiser phases split the budget")
  {
    std::vector<LossRow> rows;
    Trainer t(tiny_config(Method::denoise_pretrain_finetune, 5), data);
    t.run_all([&](LossRow const &r) { rows.push_back(r); });
    long pre = 0, fine = 0, val = 0;
    for (auto const &r : rows) {
      pre += r.phase == "pretrain";
      fine += r.phase == "finetune";
      val += r.phase == "val";
    }
    CHECK(pre == 3);
    CHECK(fine == 2);
    CHECK(val == 2); // end of each phase
  }
  SECTION("resume continues bit-identically")
  {
    auto const dir = std::filesystem::temp_directory_path() / "n2r_test_resume";
    std::filesystem::create_directories(dir);
    for (auto m : {Method::noise2recon, Method::denoise_pretrain_finetune}) {
      auto const c = tiny_config(m, 16);
      std::vector<std::string> straight, resumed;
      Trainer a(c, data);
      a.run_all([&](LossRow const &r) { straight.push_back(format_loss_row(r)); });

      Trainer b(c, data);
      b.run(7, [&](LossRow const &r) { resumed.push_back(format_loss_row(r)); });
      b.save(dir / "ckpt.n2rt");
      Trainer c2 = Trainer::load(dir / "ckpt.n2rt", c, data);
      CHECK(c2.state().step == 7);
      c2.run_all([&](LossRow const &r) { resumed.push_back(format_loss_row(r)); });
      INFO(to_string(m));
      CHECK(straight == resumed);
      CHECK(same_params(a.state().params, c2.state().params));
      CHECK(same_params(a.state().best, c2.state().best));

      c2.save(dir / "final.n2rt");
      auto const model = load_model(dir / "final.n2rt");
      CHECK(same_params(model, c2.state().best));
      CHECK_THROWS_AS(Trainer::load(dir / "final.n2rt", tiny_config(Method::supervised, 16), data), ConfigError);
    }
    std::filesystem::remove_all(dir);
  }
  SECTION("inference helper rescales to the input units")
  {
    Trainer t(tiny_config(Method::supervised, 2), data);
    auto const &ex = data.val[0];
    auto const y = ex.kspace.undersample(ex.fixed_mask);
    auto const out = reconstruct(t.state().params, y, ex.sens);
    CHECK(out.height() == 32);
    auto const scaled_out = reconstruct(t.state().params, y.scaled(3.0), ex.sens);
    CHECK(scaled_out.norm() == Approx(3.0 * out.norm()).epsilon(1e-4));
  }
}
