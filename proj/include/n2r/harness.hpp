#pragma once

#include "n2r/metrics.hpp"
#include "n2r/training.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace n2r::harness {

namespace fs = std::filesystem;

struct DatasetConfig
{
  int height = 64;
  int width = 64;
  int ncoils = 4;
  int slices = 8;
  int train_scans = 14;
  int val_scans = 2;
  int test_scans = 3;
  double accel = 4.0; // R_train; fixed masks of unsupervised and held-out scans
  int calib = 8;
  std::uint64_t seed = 0;
};

struct EvalConfig
{
  std::vector<double> sigma_test{0.0, 0.2, 0.4, 0.6};
  std::vector<double> accel_test{4.0};
  std::uint64_t mask_seed = 20220101; // fixed seed of the test trajectories
  std::optional<double> cs_lambda;    // nullopt: tabulated schedule (R in {12, 16})
  int cs_iters = 25;
};

struct ExperimentConfig
{
  DatasetConfig data;
  train::TrainConfig train;
  EvalConfig eval;
};

// Sectioned key-value text ([dataset], [train], [eval]). Unknown sections
// or keys are config errors.
ExperimentConfig parse_config(std::istream &is);
ExperimentConfig load_config(fs::path const &path);
void write_config(std::ostream &os, ExperimentConfig const &cfg);

// "LO:HI" and "TS:TU" flag values.
train::NoiseRange parse_sigma_range(std::string const &s);
std::pair<int, int> parse_ratio(std::string const &s);
std::vector<double> parse_list(std::string const &s);

// ------------------------------------------------------------------ dataset

enum class Split
{
  train,
  val,
  test,
};
std::string to_string(Split s);

struct ScanEntry
{
  int scan_id = 0;
  Split split = Split::train;
  int slices = 0;
  std::string file; // relative to the dataset directory
  std::uint64_t mask_seed = 0;
};

struct DatasetManifest
{
  DatasetConfig config;
  std::vector<ScanEntry> scans;

  [[nodiscard]] std::vector<ScanEntry> of(Split s) const;
  // First k training scans in scan-ID order, so D_1 is contained in D_2 etc.
  [[nodiscard]] std::vector<int> supervised_scans(int k) const;
};

struct Scan
{
  ScanEntry entry;
  std::vector<ComplexImage> slices;
  CoilSensitivities sens;
  SamplingMask mask; // fixed acquisition mask at R_train
};

inline constexpr char const *kManifestFile = "manifest.json";

DatasetManifest make_manifest(DatasetConfig const &cfg);
// Pure function of (scan_id, R_test, fixed seed).
SamplingMask test_mask(DatasetManifest const &m, int scan_id, double accel, std::uint64_t mask_seed);
Scan synthesize_scan(DatasetManifest const &m, ScanEntry const &e, std::uint64_t test_mask_seed);

void simulate(ExperimentConfig const &cfg, fs::path const &out, bool force);
DatasetManifest load_manifest(fs::path const &dir);
Scan load_scan(fs::path const &dir, ScanEntry const &e);

train::Datasets make_datasets(fs::path const &dir, DatasetManifest const &m, int k);

// ---------------------------------------------------------------- commands

struct TrainOutput
{
  fs::path checkpoint;
  fs::path loss_csv;
  fs::path config;
  long resumed_from = 0;
};

inline constexpr char const *kCheckpointFile = "checkpoint.n2rt";
inline constexpr char const *kLossFile = "loss.csv";
inline constexpr char const *kResolvedConfigFile = "config.ini";

// Resumes from an unfinished checkpoint in `out`; --force restarts.
// `stop_after` interrupts the run after that many steps (testing resume).
TrainOutput train(ExperimentConfig const &cfg, fs::path const &dataset, fs::path const &out, bool force,
                  std::optional<long> stop_after = {});

// A reconstructor: takes undersampled noisy k-space and maps, returns an image.
struct Reconstructor
{
  std::string method;
  int k = 0;
  double R_train = 0.0;
  std::function<ComplexImage(KSpace const &y, CoilSensitivities const &sens, ComplexImage const &target, double sigma)>
    run;
};

Reconstructor model_reconstructor(fs::path const &checkpoint);
Reconstructor cs_reconstructor(EvalConfig const &eval, double R_train);
Reconstructor zero_filled_reconstructor();
Reconstructor oracle_reconstructor(); // returns the target (plumbing check)

// Sweeps every test slice over eval.sigma_test x eval.accel_test. Rows are
// ordered by (reconstructor, R_test, sigma_test, scan, slice).
std::vector<metrics::MetricRecord> evaluate(fs::path const &dataset, EvalConfig const &eval,
                                            std::vector<Reconstructor> const &recons);

void write_metrics(fs::path const &path, std::vector<metrics::MetricRecord> const &records);

// CS on every test scan at one acceleration; writes recon_<scan>.n2rt and
// metrics.csv into `out`.
std::vector<metrics::MetricRecord> run_cs(fs::path const &dataset, EvalConfig const &eval, double accel,
                                          fs::path const &out);

// Aggregates metric CSVs; writes table.txt and series.csv, returns the table.
std::string report(std::vector<fs::path> const &csvs, fs::path const &out);

// Worker count from N2R_THREADS (default: hardware concurrency).
int thread_count();
// Runs f(i) for i in [0, n) on up to thread_count() workers.
void parallel_for(std::size_t n, std::function<void(std::size_t)> const &f);

} // namespace n2r::harness
