#include "n2r/training.hpp"
#include "n2r/tensor_io.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace n2r::train {

namespace {

// Seed-derivation stream keys.
enum : std::uint64_t
{
  kStreamSup = 1,
  kStreamUnsup = 2,
  kStreamPool = 3,
  kStreamVal = 4,
  kStreamRandom = 5,
  kStreamInit = 6,
  kKeyMask = 10,
  kKeyAug = 11,
  kKeySigma = 12,
  kKeyNoise = 13,
};

void backward_weighted(Tensor<float> const &loss, double weight)
{
  if (weight == 0.0 || !loss.requires_grad()) { return; }
  nn::backward(weight == 1.0 ? loss : nn::scale(loss, weight));
}

StepResult finish(Model const &model, ComplexImage const &input, ComplexImage const &target, double scale,
                  double weight)
{
  StepResult r;
  r.scale = scale;
  r.target = to_tensor(target);
  r.prediction = model(to_tensor(input));
  auto const loss = nn::complex_l1(r.prediction, r.target);
  r.loss = loss.item();
  backward_weighted(loss, weight);
  return r;
}

void require_target(Example const &ex, char const *op)
{
  if (!ex.target) { throw UsageError(fmt::format("{}: example (scan {}, slice {}) has no target", op, ex.scan_id, ex.slice_id)); }
}

SamplingMask fresh_mask(Example const &ex, MaskSpec const &m, std::uint64_t seed)
{
  return make_poisson_disc_mask(ex.kspace.height(), ex.kspace.width(), m.accel, m.calib,
                                derive_seed(seed, {kKeyMask}));
}

double mean_loss(std::vector<double> const &v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

std::string num(double v) { return fmt::format("{}", v); }

} // namespace

void NoiseRange::validate() const
{
  if (!(lo >= 0.0 && lo < hi && std::isfinite(hi))) {
    throw ConfigError(fmt::format("noise range [{}, {}) must satisfy 0 <= lo < hi", lo, hi));
  }
}

Tensor<float> to_tensor(ComplexImage const &x)
{
  std::size_t const n = x.size();
  std::vector<float> v(2 * n);
  auto const d = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = static_cast<float>(d[i].real());
    v[n + i] = static_cast<float>(d[i].imag());
  }
  return Tensor<float>({2, x.height(), x.width()}, std::move(v));
}

ComplexImage to_image(Tensor<float> const &t)
{
  if (t.shape().size() != 3 || t.dim(0) != 2) { throw DimensionError("to_image: expected a [2, H, W] tensor"); }
  ComplexImage x(t.dim(1), t.dim(2));
  std::size_t const n = x.size();
  auto const v = t.data();
  auto d = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = Complex(v[i], v[n + i]);
  }
  return x;
}

std::uint64_t step_noise_seed(std::uint64_t seed) { return derive_seed(seed, {kKeyNoise}); }

StepResult supervised_step(Model const &model, Example const &ex, MaskSpec const &mask, std::uint64_t seed,
                           double weight)
{
  return augmented_supervised_step(model, ex, mask, 0.0, {0.0, 1.0}, seed, weight);
}

StepResult augmented_supervised_step(Model const &model, Example const &ex, MaskSpec const &mask, double p,
                                     NoiseRange const &range, std::uint64_t seed, double weight)
{
  require_target(ex, "supervised_step");
  KSpace y = ex.kspace.undersample(fresh_mask(ex, mask, seed));
  ComplexImage const zf = adjoint_sense(y, ex.sens);
  Rng rng(derive_seed(seed, {kKeyAug}));
  bool const apply = p > 0.0 && rng.uniform() < p;
  double sigma = 0.0;
  ComplexImage input = zf;
  if (apply) {
    sigma = range.draw(rng);
    y = add_masked_noise(y, {sigma, step_noise_seed(seed)}, zf);
    input = adjoint_sense(y, ex.sens);
  }
  // Inputs are normalised the way they are at inference time: by their own p95.
  auto const [xn, s] = normalize_p95(input);
  auto r = finish(model, xn, scaled(*ex.target, 1.0 / s), s, weight);
  r.augmented = apply;
  r.sigma = sigma;
  return r;
}

StepResult consistency_step(Model const &model, Example const &ex, NoiseRange const &range, std::uint64_t seed,
                            double weight, std::optional<double> sigma)
{
  if (ex.target) { throw UsageError("consistency_step: example has a target; use the supervised path"); }
  if (!(ex.kspace.mask() == ex.fixed_mask)) {
    throw UsageError("consistency_step: k-space was not acquired with the example's fixed mask");
  }
  ComplexImage const zf = adjoint_sense(ex.kspace, ex.sens);
  auto const [xn, s] = normalize_p95(zf);
  Tensor<float> pseudo;
  {
    nn::NoGrad guard;
    pseudo = model(to_tensor(xn)).detach();
  }
  double sig = 0.0;
  if (sigma) {
    sig = *sigma;
  } else {
    Rng rng(derive_seed(seed, {kKeySigma}));
    sig = range.draw(rng);
  }
  KSpace const noisy = add_masked_noise(ex.kspace, {sig, step_noise_seed(seed)}, zf);
  StepResult r;
  r.scale = s;
  r.sigma = sig;
  r.augmented = true;
  r.target = pseudo;
  r.prediction = model(to_tensor(scaled(adjoint_sense(noisy, ex.sens), 1.0 / s)));
  auto const loss = nn::complex_l1(r.prediction, pseudo);
  r.loss = loss.item();
  backward_weighted(loss, weight);
  return r;
}

StepResult denoise_step(Model const &model, Example const &ex, MaskSpec const &mask, NoiseRange const &range,
                        std::uint64_t seed, double weight, std::optional<double> sigma)
{
  KSpace const y = ex.target ? ex.kspace.undersample(fresh_mask(ex, mask, seed)) : ex.kspace;
  ComplexImage const zf = adjoint_sense(y, ex.sens);
  auto const [xn, s] = normalize_p95(zf);
  double sig = 0.0;
  if (sigma) {
    sig = *sigma;
  } else {
    Rng rng(derive_seed(seed, {kKeySigma}));
    sig = range.draw(rng);
  }
  KSpace const noisy = add_masked_noise(y, {sig, step_noise_seed(seed)}, zf);
  auto r = finish(model, scaled(adjoint_sense(noisy, ex.sens), 1.0 / s), xn, s, weight);
  r.augmented = true;
  r.sigma = sig;
  return r;
}

// ------------------------------------------------------------------ samplers

ShuffledStream::ShuffledStream(std::size_t n, std::uint64_t seed, std::uint64_t stream)
  : n_{n}
  , seed_{seed}
  , stream_{stream}
{
  if (n == 0) { throw ConfigError("sampler: empty dataset"); }
}

std::size_t ShuffledStream::at(std::uint64_t j) const
{
  std::uint64_t const epoch = j / n_;
  if (epoch != cached_epoch_) {
    perm_.resize(n_);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    Rng rng(derive_seed(seed_, {stream_, epoch}));
    for (std::size_t i = n_; i > 1; --i) {
      std::swap(perm_[i - 1], perm_[rng.below(i)]);
    }
    cached_epoch_ = epoch;
  }
  return perm_[j % n_];
}

BalancedSampler::BalancedSampler(int ts, int tu, std::size_t ns, std::size_t nu, std::uint64_t seed)
  : ts_{ts}
  , tu_{tu}
  , sup_{ns, seed, kStreamSup}
  , unsup_{nu, seed, kStreamUnsup}
{
  if (ts < 1 || tu < 1) { throw ConfigError("balanced sampler: T_S and T_U must be >= 1"); }
}

Draw BalancedSampler::at(std::uint64_t i) const
{
  std::uint64_t const period = static_cast<std::uint64_t>(ts_) + tu_;
  std::uint64_t const cycle = i / period, pos = i % period;
  if (pos < static_cast<std::uint64_t>(ts_)) {
    std::uint64_t const j = cycle * ts_ + pos;
    return {DrawKind::Supervised, sup_.at(j), j};
  }
  std::uint64_t const j = cycle * tu_ + (pos - ts_);
  return {DrawKind::Unsupervised, unsup_.at(j), j};
}

RandomSampler::RandomSampler(std::size_t ns, std::size_t nu, std::uint64_t seed)
  : ns_{ns}
  , nu_{nu}
  , seed_{seed}
{
  if (ns == 0 || nu == 0) { throw ConfigError("random sampler: empty dataset"); }
}

Draw RandomSampler::at(std::uint64_t i) const
{
  Rng rng(derive_seed(seed_, {kStreamRandom, i}));
  std::size_t const k = static_cast<std::size_t>(rng.below(ns_ + nu_));
  if (k < ns_) { return {DrawKind::Supervised, k, i}; }
  return {DrawKind::Unsupervised, k - ns_, i};
}

// -------------------------------------------------------------------- config

std::string to_string(Method m)
{
  switch (m) {
  case Method::supervised: return "supervised";
  case Method::supervised_aug: return "supervised_aug";
  case Method::denoise_pretrain_finetune: return "denoise_pretrain_finetune";
  case Method::noise2recon: return "noise2recon";
  }
  return "?";
}

Method parse_method(std::string const &s)
{
  for (auto m : {Method::supervised, Method::supervised_aug, Method::denoise_pretrain_finetune, Method::noise2recon}) {
    if (s == to_string(m)) { return m; }
  }
  throw ConfigError("unknown method '" + s +
                    "' (expected supervised, supervised_aug, denoise_pretrain_finetune or noise2recon)");
}

void TrainConfig::validate() const
{
  if (!(lambda_cons >= 0.0)) { throw ConfigError("lambda must be >= 0"); }
  noise_range.validate();
  if (!(aug_prob >= 0.0 && aug_prob <= 1.0)) { throw ConfigError("augmentation probability must lie in [0, 1]"); }
  if (ratio_sup < 1 || ratio_unsup < 1) { throw ConfigError("sampling ratio T_S:T_U needs T_S, T_U >= 1"); }
  if (steps < 1) { throw ConfigError("steps must be >= 1"); }
  if (!(mask.accel >= 1.0)) { throw ConfigError("acceleration must be >= 1"); }
  if (k_supervised < 0) { throw ConfigError("k must be >= 0"); }
  if (val_every < 1) { throw ConfigError("val_every must be >= 1"); }
  if (net.depth < 0 || net.base_channels < 1) { throw ConfigError("invalid network architecture"); }
}

std::string format_loss_row(LossRow const &r)
{
  return fmt::format("{},{},{},{},{}", r.step, r.phase, r.loss_sup ? num(*r.loss_sup) : "",
                     r.loss_cons ? num(*r.loss_cons) : "", num(r.loss_total));
}

// ------------------------------------------------------------------- Trainer

Trainer::Trainer(TrainConfig cfg, Datasets const &data)
  : cfg_{std::move(cfg)}
  , data_{&data}
{
  cfg_.validate();
  if (data.sup.empty()) { throw ConfigError("training needs at least one supervised scan (k >= 1)"); }
  if (cfg_.method == Method::noise2recon && data.unsup.empty()) {
    throw ConfigError("noise2recon needs unsupervised scans; with none it degenerates to supervised training");
  }
  if (data.val.empty()) { throw ConfigError("training needs a validation split"); }
  if (cfg_.method == Method::noise2recon) {
    if (cfg_.sampling == Sampling::balanced) {
      balanced_.emplace(cfg_.ratio_sup, cfg_.ratio_unsup, data.sup.size(), data.unsup.size(), cfg_.seed);
    } else {
      random_.emplace(data.sup.size(), data.unsup.size(), cfg_.seed);
    }
  } else if (cfg_.method == Method::denoise_pretrain_finetune) {
    pool_.emplace(data.sup.size() + data.unsup.size(), cfg_.seed, kStreamPool);
  }
  st_.params = nn::init_unet<float>(cfg_.net, derive_seed(cfg_.seed, {kStreamInit}));
  st_.opt.cfg = cfg_.adam;
  st_.best = st_.params.clone();
}

bool Trainer::in_pretrain() const
{
  return cfg_.method == Method::denoise_pretrain_finetune && st_.step < cfg_.pretrain_steps();
}

std::string Trainer::phase() const
{
  if (cfg_.method != Method::denoise_pretrain_finetune) { return "train"; }
  return in_pretrain() ? "pretrain" : "finetune";
}

LossRow Trainer::one_step()
{
  auto &p = st_.params;
  Model const model = [&p](Tensor<float> const &x) { return nn::unet_forward(p, x); };
  long const i = st_.step;
  LossRow row{i + 1, phase(), {}, {}, 0.0};
  bool update = true;
  auto const sup_seed = [&](std::uint64_t j) { return derive_seed(cfg_.seed, {kStreamSup, j}); };

  p.zero_grad();
  switch (cfg_.method) {
  case Method::supervised: {
    ShuffledStream const s(data_->sup.size(), cfg_.seed, kStreamSup);
    auto const j = static_cast<std::uint64_t>(i);
    row.loss_sup = supervised_step(model, data_->sup[s.at(j)], cfg_.mask, sup_seed(j)).loss;
    row.loss_total = *row.loss_sup;
    break;
  }
  case Method::supervised_aug: {
    ShuffledStream const s(data_->sup.size(), cfg_.seed, kStreamSup);
    auto const j = static_cast<std::uint64_t>(i);
    row.loss_sup = augmented_supervised_step(model, data_->sup[s.at(j)], cfg_.mask, cfg_.aug_prob, cfg_.noise_range,
                                             sup_seed(j))
                     .loss;
    row.loss_total = *row.loss_sup;
    break;
  }
  case Method::noise2recon: {
    Draw const d = balanced_ ? balanced_->at(static_cast<std::uint64_t>(i)) : random_->at(static_cast<std::uint64_t>(i));
    if (d.kind == DrawKind::Supervised) {
      row.loss_sup = supervised_step(model, data_->sup[d.index], cfg_.mask, sup_seed(d.ordinal)).loss;
      row.loss_total = *row.loss_sup;
    } else if (cfg_.lambda_cons > 0.0) {
      row.loss_cons = consistency_step(model, data_->unsup[d.index], cfg_.noise_range,
                                       derive_seed(cfg_.seed, {kStreamUnsup, d.ordinal}), cfg_.lambda_cons)
                        .loss;
      row.loss_total = cfg_.lambda_cons * *row.loss_cons;
    } else {
      // Zero-weighted consistency: no forward pass, no optimiser step.
      row.loss_cons = 0.0;
      update = false;
    }
    break;
  }
  case Method::denoise_pretrain_finetune: {
    if (in_pretrain()) {
      auto const j = static_cast<std::uint64_t>(i);
      std::size_t const k = pool_->at(j);
      Example const &ex = k < data_->sup.size() ? data_->sup[k] : data_->unsup[k - data_->sup.size()];
      row.loss_sup = denoise_step(model, ex, cfg_.mask, cfg_.noise_range, derive_seed(cfg_.seed, {kStreamPool, j})).loss;
    } else {
      ShuffledStream const s(data_->sup.size(), cfg_.seed, kStreamSup);
      auto const j = static_cast<std::uint64_t>(i - cfg_.pretrain_steps());
      row.loss_sup = supervised_step(model, data_->sup[s.at(j)], cfg_.mask, sup_seed(j)).loss;
    }
    row.loss_total = *row.loss_sup;
    break;
  }
  }
  if (!std::isfinite(row.loss_total)) {
    throw NumericalError(fmt::format("training diverged at step {} (loss {})", i + 1, row.loss_total));
  }
  if (update) { nn::adam_step(p, st_.opt); }
  ++st_.step;
  return row;
}

double Trainer::validation_loss(nn::ModelParams<float> const &p) const
{
  nn::NoGrad guard;
  Model const model = [&p](Tensor<float> const &x) { return nn::unet_forward(p, x); };
  std::vector<double> losses;
  bool const denoise = in_pretrain();
  double const mid = 0.5 * (cfg_.noise_range.lo + cfg_.noise_range.hi);
  for (std::size_t i = 0; i < data_->val.size(); ++i) {
    Example const &ex = data_->val[i];
    KSpace const y = ex.kspace.undersample(ex.fixed_mask);
    ComplexImage const zf = adjoint_sense(y, ex.sens);
    auto const [xn, s] = normalize_p95(zf);
    if (denoise) {
      KSpace const noisy = add_masked_noise(y, {mid, derive_seed(cfg_.seed, {kStreamVal, i})}, zf);
      auto const pred = model(to_tensor(scaled(adjoint_sense(noisy, ex.sens), 1.0 / s)));
      losses.push_back(nn::complex_l1(pred, to_tensor(xn)).item());
    } else {
      auto const pred = model(to_tensor(xn));
      losses.push_back(nn::complex_l1(pred, to_tensor(scaled(*ex.target, 1.0 / s))).item());
    }
  }
  return mean_loss(losses);
}

void Trainer::maybe_validate(std::function<void(LossRow const &)> const &sink)
{
  long const s = st_.step;
  bool const phase_end = cfg_.method == Method::denoise_pretrain_finetune && s == cfg_.pretrain_steps();
  if (s % cfg_.val_every != 0 && s != cfg_.steps && !phase_end) { return; }

  // At the phase boundary in_pretrain() is already false; evaluate the
  // denoising task explicitly.
  double v = 0.0;
  if (phase_end) {
    --st_.step;
    v = validation_loss(st_.params);
    ++st_.step;
  } else {
    v = validation_loss(st_.params);
  }
  if (sink) { sink({s, "val", {}, {}, v}); }
  if (v < st_.best_val) {
    st_.best_val = v;
    st_.best_step = s;
    st_.best = st_.params.clone();
  }
  if (phase_end && s < cfg_.steps) {
    // Fine-tuning starts from the best denoiser with a fresh optimiser.
    st_.params = st_.best.clone();
    st_.opt = nn::OptimState<float>{};
    st_.opt.cfg = cfg_.adam;
    st_.best_val = INFINITY;
    st_.best_step = s;
  }
}

void Trainer::run(long until, std::function<void(LossRow const &)> const &sink)
{
  until = std::min(until, cfg_.steps);
  while (st_.step < until) {
    LossRow const row = one_step();
    if (sink) { sink(row); }
    maybe_validate(sink);
  }
}

// -------------------------------------------------------------- checkpoints

namespace {

void add_params(io::Archive &a, nn::ModelParams<float> const &p, std::string const &prefix)
{
  for (auto const &name : p.names()) {
    auto const &t = p.at(name);
    std::vector<std::uint64_t> dims(t.shape().begin(), t.shape().end());
    a.add(prefix + name, io::from_float(t.data(), dims));
  }
}

void add_moments(io::Archive &a, nn::ModelParams<float> const &p, std::map<std::string, std::vector<float>> const &m,
                 std::string const &prefix)
{
  for (auto const &name : p.names()) {
    auto it = m.find(name);
    if (it == m.end()) { continue; }
    a.add(prefix + name, io::from_float(std::span<float const>(it->second), {it->second.size()}));
  }
}

nn::ModelParams<float> read_params(io::Archive const &a, nn::UNetConfig const &cfg, std::string const &prefix)
{
  auto p = nn::init_unet<float>(cfg, 0);
  for (auto const &name : p.names()) {
    auto const &st = a.at(prefix + name);
    auto &t = p.at(name);
    if (st.dtype != io::DType::Float32 || st.values.size() != t.numel()) {
      throw ParseError("checkpoint: tensor '" + prefix + name + "' has the wrong shape");
    }
    std::copy(st.values.begin(), st.values.end(), t.mutable_data().begin());
  }
  return p;
}

io::StoredTensor text_record(std::string const &s)
{
  std::vector<float> v(s.begin(), s.end());
  for (auto &x : v) {
    x = static_cast<float>(static_cast<unsigned char>(static_cast<char>(x)));
  }
  return io::from_float(std::span<float const>(v), {v.size()});
}

std::string text_of(io::StoredTensor const &t)
{
  std::string s;
  for (float f : t.values) {
    s.push_back(static_cast<char>(static_cast<unsigned char>(f)));
  }
  return s;
}

nlohmann::json read_manifest(io::Archive const &a)
{
  try {
    return nlohmann::json::parse(text_of(a.at(kManifestRecord)));
  } catch (nlohmann::json::exception const &e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what());
  }
}

nn::UNetConfig net_of(nlohmann::json const &m)
{
  nn::UNetConfig c;
  try {
    c.depth = m.at("depth").get<int>();
    c.base_channels = m.at("base_channels").get<int>();
    c.in_channels = m.value("in_channels", 2);
    c.out_channels = m.value("out_channels", 2);
    c.leaky_slope = m.value("leaky_slope", 0.2);
  } catch (nlohmann::json::exception const &e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what());
  }
  return c;
}

} // namespace

void Trainer::save(std::filesystem::path const &path) const
{
  nlohmann::json m;
  m["format"] = "n2r-checkpoint";
  m["method"] = to_string(cfg_.method);
  m["depth"] = cfg_.net.depth;
  m["base_channels"] = cfg_.net.base_channels;
  m["in_channels"] = cfg_.net.in_channels;
  m["out_channels"] = cfg_.net.out_channels;
  m["leaky_slope"] = cfg_.net.leaky_slope;
  m["step"] = st_.step;
  m["steps"] = cfg_.steps;
  m["k"] = cfg_.k_supervised;
  m["R_train"] = cfg_.mask.accel;
  m["phase"] = phase();
  // Every random draw is derived from (seed, stream, counter), so the
  // generator state is fully described by the seed and the step counter.
  m["rng"] = {{"seed", cfg_.seed}, {"step", st_.step}};
  m["adam_step"] = st_.opt.step;
  m["best_step"] = st_.best_step;
  m["best_val"] = std::isfinite(st_.best_val) ? nlohmann::json(st_.best_val) : nlohmann::json(nullptr);

  io::Archive a;
  a.add(kManifestRecord, text_record(m.dump()));
  add_params(a, st_.params, "");
  add_params(a, st_.best, "best/");
  add_moments(a, st_.params, st_.opt.m, "adam.m/");
  add_moments(a, st_.params, st_.opt.v, "adam.v/");
  auto tmp = path;
  tmp += ".tmp";
  io::save_archive(tmp, a);
  std::filesystem::rename(tmp, path);
}

Trainer Trainer::load(std::filesystem::path const &path, TrainConfig cfg, Datasets const &data)
{
  try {
    return load_impl(path, std::move(cfg), data);
  } catch (nlohmann::json::exception const &e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what());
  }
}

Trainer Trainer::load_impl(std::filesystem::path const &path, TrainConfig cfg, Datasets const &data)
{
  io::Archive const a = io::load_archive(path);
  auto const m = read_manifest(a);
  Trainer t(std::move(cfg), data);
  auto const net = net_of(m);
  if (net.depth != t.cfg_.net.depth || net.base_channels != t.cfg_.net.base_channels) {
    throw ConfigError("checkpoint architecture does not match the configuration");
  }
  if (m.at("method").get<std::string>() != to_string(t.cfg_.method)) {
    throw ConfigError("checkpoint was written by method '" + m.at("method").get<std::string>() + "'");
  }
  if (m.at("rng").at("seed").get<std::uint64_t>() != t.cfg_.seed) {
    throw ConfigError("checkpoint seed does not match the configuration");
  }
  t.st_.step = m.at("step").get<long>();
  t.st_.params = read_params(a, net, "");
  t.st_.best = read_params(a, net, "best/");
  t.st_.best_step = m.at("best_step").get<long>();
  t.st_.best_val = m.at("best_val").is_null() ? INFINITY : m.at("best_val").get<double>();
  t.st_.opt.cfg = t.cfg_.adam;
  t.st_.opt.step = m.at("adam_step").get<long>();
  for (auto const &name : t.st_.params.names()) {
    if (a.contains("adam.m/" + name)) {
      t.st_.opt.m[name] = a.at("adam.m/" + name).values;
      t.st_.opt.v[name] = a.at("adam.v/" + name).values;
    }
  }
  return t;
}

CheckpointInfo read_checkpoint_info(std::filesystem::path const &checkpoint)
{
  auto const m = read_manifest(io::load_archive(checkpoint));
  CheckpointInfo info;
  try {
    info.method = parse_method(m.at("method").get<std::string>());
    info.k = m.at("k").get<int>();
    info.R_train = m.at("R_train").get<double>();
    info.step = m.at("step").get<long>();
    info.steps = m.at("steps").get<long>();
  } catch (nlohmann::json::exception const &e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what());
  }
  info.net = net_of(m);
  return info;
}

nn::ModelParams<float> load_model(std::filesystem::path const &checkpoint)
{
  io::Archive const a = io::load_archive(checkpoint);
  auto const net = net_of(read_manifest(a));
  bool const has_best = a.contains("best/final.weight");
  return read_params(a, net, has_best ? "best/" : "");
}

ComplexImage reconstruct(nn::ModelParams<float> const &p, KSpace const &y, CoilSensitivities const &sens)
{
  nn::NoGrad guard;
  auto const [xn, s] = normalize_p95(adjoint_sense(y, sens));
  return scaled(to_image(nn::unet_forward(p, to_tensor(xn))), s);
}

} // namespace n2r::train
