#pragma once

#include "n2r/kspace.hpp"
#include "n2r/nn/adam.hpp"
#include "n2r/nn/unet.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace n2r::train {

using nn::Tensor;
using Model = std::function<Tensor<float>(Tensor<float> const &)>;

struct Example
{
  KSpace kspace; // fully sampled when target is present, else acquired with fixed_mask
  CoilSensitivities sens;
  std::optional<ComplexImage> target;
  SamplingMask fixed_mask;
  int scan_id = 0;
  int slice_id = 0;
};

// Half-open [lo, hi).
struct NoiseRange
{
  double lo = 0.2;
  double hi = 0.5;
  void validate() const;
  [[nodiscard]] double draw(Rng &rng) const { return rng.uniform(lo, hi); }
};

struct MaskSpec
{
  double accel = 4.0;
  int calib = 8;
};

// [2, H, W] real/imaginary planes.
Tensor<float> to_tensor(ComplexImage const &x);
ComplexImage to_image(Tensor<float> const &t);

struct StepResult
{
  double loss = 0.0;
  Tensor<float> prediction;
  Tensor<float> target;
  bool augmented = false;
  double sigma = 0.0;
  double scale = 1.0;
};

// Every step finishes with a backward pass of weight * loss (skipped when
// weight is 0); the returned loss is unweighted.
StepResult supervised_step(Model const &model, Example const &ex, MaskSpec const &mask, std::uint64_t seed,
                           double weight = 1.0);
StepResult augmented_supervised_step(Model const &model, Example const &ex, MaskSpec const &mask, double p,
                                     NoiseRange const &range, std::uint64_t seed, double weight = 1.0);
// Seed of the k-space noise realisation drawn by a step seeded with `seed`.
std::uint64_t step_noise_seed(std::uint64_t seed);

// `sigma` overrides the draw from `range` (used to force sigma = 0).
StepResult consistency_step(Model const &model, Example const &ex, NoiseRange const &range, std::uint64_t seed,
                            double weight = 1.0, std::optional<double> sigma = {});
// Phase-1 denoising on zero-filled images: noisy zero-filled input,
// clean zero-filled target, shared normalisation.
StepResult denoise_step(Model const &model, Example const &ex, MaskSpec const &mask, NoiseRange const &range,
                        std::uint64_t seed, double weight = 1.0, std::optional<double> sigma = {});

// Uniform draws with reshuffling per epoch; draw j is a pure function of
// (seed, stream, j).
class ShuffledStream
{
public:
  ShuffledStream(std::size_t n, std::uint64_t seed, std::uint64_t stream);
  [[nodiscard]] std::size_t at(std::uint64_t j) const;
  [[nodiscard]] std::size_t size() const { return n_; }

private:
  std::size_t n_;
  std::uint64_t seed_, stream_;
  mutable std::uint64_t cached_epoch_ = ~std::uint64_t{0};
  mutable std::vector<std::size_t> perm_;
};

enum class DrawKind
{
  Supervised,
  Unsupervised,
};

struct Draw
{
  DrawKind kind;
  std::size_t index;     // into D_s or D_u
  std::uint64_t ordinal; // per-kind draw counter
};

// T_S supervised draws then T_U unsupervised draws per cycle.
class BalancedSampler
{
public:
  BalancedSampler(int ts, int tu, std::size_t ns, std::size_t nu, std::uint64_t seed);
  [[nodiscard]] Draw at(std::uint64_t i) const;

private:
  int ts_, tu_;
  ShuffledStream sup_, unsup_;
};

// Uniform over D_s union D_u (ablation baseline).
class RandomSampler
{
public:
  RandomSampler(std::size_t ns, std::size_t nu, std::uint64_t seed);
  [[nodiscard]] Draw at(std::uint64_t i) const;

private:
  std::size_t ns_, nu_;
  std::uint64_t seed_;
};

enum class Method
{
  supervised,
  supervised_aug,
  denoise_pretrain_finetune,
  noise2recon,
};
std::string to_string(Method m);
Method parse_method(std::string const &s);

enum class Sampling
{
  balanced,
  random,
};

struct TrainConfig
{
  Method method = Method::noise2recon;
  double lambda_cons = 0.1;
  NoiseRange noise_range{0.2, 0.5};
  double aug_prob = 0.2;
  int ratio_sup = 1;
  int ratio_unsup = 1;
  Sampling sampling = Sampling::balanced;
  long steps = 2000;
  std::uint64_t seed = 0;
  MaskSpec mask{4.0, 8};
  int k_supervised = 1;
  nn::UNetConfig net{2, 8, 2, 2, 0.2};
  nn::AdamConfig adam;
  int val_every = 100;

  void validate() const;
  // Phase budgets for denoise_pretrain_finetune: ceil / floor of steps / 2.
  [[nodiscard]] long pretrain_steps() const { return (steps + 1) / 2; }
};

struct LossRow
{
  long step = 0;
  std::string phase; // train | pretrain | finetune | val
  std::optional<double> loss_sup;
  std::optional<double> loss_cons;
  double loss_total = 0.0;
};

inline constexpr char const *kLossCsvHeader = "step,phase,loss_sup,loss_cons,loss_total";
std::string format_loss_row(LossRow const &r);

struct Datasets
{
  std::vector<Example> sup;   // D_s: slices of supervised scans
  std::vector<Example> unsup; // D_u: slices of unsupervised scans
  std::vector<Example> val;   // held-out scans with targets
};

struct TrainState
{
  nn::ModelParams<float> params;
  nn::OptimState<float> opt;
  long step = 0; // drawn examples consumed so far
  nn::ModelParams<float> best;
  double best_val = INFINITY;
  long best_step = 0;
};

class Trainer
{
public:
  Trainer(TrainConfig cfg, Datasets const &data);

  [[nodiscard]] TrainConfig const &config() const { return cfg_; }
  [[nodiscard]] TrainState const &state() const { return st_; }
  [[nodiscard]] bool finished() const { return st_.step >= cfg_.steps; }

  // Advances to `until` (capped at cfg.steps); each logged row is passed
  // to `sink` in order.
  void run(long until, std::function<void(LossRow const &)> const &sink = {});
  void run_all(std::function<void(LossRow const &)> const &sink = {}) { run(cfg_.steps, sink); }

  // Mean validation loss for the current phase's task.
  [[nodiscard]] double validation_loss(nn::ModelParams<float> const &p) const;

  void save(std::filesystem::path const &path) const;
  // Restores a Trainer saved with an identical config.
  static Trainer load(std::filesystem::path const &path, TrainConfig cfg, Datasets const &data);

private:
  static Trainer load_impl(std::filesystem::path const &path, TrainConfig cfg, Datasets const &data);
  [[nodiscard]] std::string phase() const;
  [[nodiscard]] bool in_pretrain() const;
  LossRow one_step();
  void maybe_validate(std::function<void(LossRow const &)> const &sink);

  TrainConfig cfg_;
  Datasets const *data_;
  TrainState st_;
  std::optional<BalancedSampler> balanced_;
  std::optional<RandomSampler> random_;
  std::optional<ShuffledStream> pool_; // phase-1 draws over D_s and D_u
};

struct CheckpointInfo
{
  Method method = Method::supervised;
  int k = 0;
  double R_train = 0.0;
  long step = 0;
  long steps = 0;
  nn::UNetConfig net;
};
CheckpointInfo read_checkpoint_info(std::filesystem::path const &checkpoint);

// Loads the validation-selected parameters (falls back to the latest).
nn::ModelParams<float> load_model(std::filesystem::path const &checkpoint);

// Inference on one undersampled acquisition: p95-normalised zero-filled
// input, network, rescale.
ComplexImage reconstruct(nn::ModelParams<float> const &p, KSpace const &y, CoilSensitivities const &sens);

// Serialised manifest record stored alongside checkpoint tensors.
inline constexpr char const *kManifestRecord = "__manifest__";

} // namespace n2r::train
