#include "n2r/harness.hpp"
#include "n2r/tensor_io.hpp"
#include "n2r/wavelet_cs.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <bit>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace n2r::harness {

namespace pt = boost::property_tree;
using nlohmann::json;

namespace {

// Seed-derivation keys for dataset synthesis.
enum : std::uint64_t
{
  kSeedCoils = 1,
  kSeedPhantom = 2,
  kSeedMask = 3,
  kSeedTestNoise = 4,
};

std::string num(double v) { return fmt::format("{}", v); }

std::string join(std::vector<double> const &v)
{
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += (i ? "," : "") + num(v[i]);
  }
  return s;
}

double parse_double(std::string const &s, std::string const &what)
{
  try {
    std::size_t used = 0;
    double const v = std::stod(s, &used);
    if (used != s.size()) { throw std::invalid_argument(s); }
    return v;
  } catch (std::exception const &) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", what, s));
  }
}

long parse_long(std::string const &s, std::string const &what)
{
  try {
    std::size_t used = 0;
    long const v = std::stol(s, &used);
    if (used != s.size()) { throw std::invalid_argument(s); }
    return v;
  } catch (std::exception const &) {
    throw ConfigError(fmt::format("{}: '{}' is not an integer", what, s));
  }
}

std::uint64_t parse_u64(std::string const &s, std::string const &what)
{
  try {
    std::size_t used = 0;
    if (!s.empty() && s[0] == '-') { throw std::invalid_argument(s); }
    auto const v = std::stoull(s, &used);
    if (used != s.size()) { throw std::invalid_argument(s); }
    return v;
  } catch (std::exception const &) {
    throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer", what, s));
  }
}

std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }

void write_text(fs::path const &p, std::string const &s)
{
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) { throw ConfigError("cannot write " + p.string()); }
  os << s;
}

} // namespace

// ------------------------------------------------------------------- config

train::NoiseRange parse_sigma_range(std::string const &s)
{
  auto const colon = s.find(':');
  if (colon == std::string::npos) { throw ConfigError("sigma range must look like LO:HI, got '" + s + "'"); }
  train::NoiseRange r{parse_double(s.substr(0, colon), "sigma range"), parse_double(s.substr(colon + 1), "sigma range")};
  r.validate();
  return r;
}

std::pair<int, int> parse_ratio(std::string const &s)
{
  auto const colon = s.find(':');
  if (colon == std::string::npos) { throw ConfigError("ratio must look like TS:TU, got '" + s + "'"); }
  long const a = parse_long(s.substr(0, colon), "ratio"), b = parse_long(s.substr(colon + 1), "ratio");
  if (a < 1 || b < 1) { throw ConfigError("ratio entries must be >= 1"); }
  return {static_cast<int>(a), static_cast<int>(b)};
}

std::vector<double> parse_list(std::string const &s)
{
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto const b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b == std::string::npos) { throw ConfigError("empty entry in list '" + s + "'"); }
    out.push_back(parse_double(item.substr(b, e - b + 1), "list"));
  }
  if (out.empty()) { throw ConfigError("empty list"); }
  return out;
}

ExperimentConfig parse_config(std::istream &is)
{
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (pt::ini_parser_error const &e) {
    throw ConfigError(fmt::format("config: {} (line {})", e.message(), e.line()));
  }
  ExperimentConfig cfg;
  auto &d = cfg.data;
  auto &t = cfg.train;
  auto &ev = cfg.eval;
  for (auto const &[section, body] : tree) {
    if (body.data().size() && body.empty()) {
      throw ConfigError("config: key '" + section + "' outside of a section");
    }
    for (auto const &[key, node] : body) {
      std::string const v = node.get_value<std::string>();
      std::string const where = section + "." + key;
      auto i = [&] { return static_cast<int>(parse_long(v, where)); };
      auto f = [&] { return parse_double(v, where); };
      bool known = true;
      if (section == "dataset") {
        if (key == "height") { d.height = i(); }
        else if (key == "width") { d.width = i(); }
        else if (key == "coils") { d.ncoils = i(); }
        else if (key == "slices") { d.slices = i(); }
        else if (key == "train_scans") { d.train_scans = i(); }
        else if (key == "val_scans") { d.val_scans = i(); }
        else if (key == "test_scans") { d.test_scans = i(); }
        else if (key == "accel") { d.accel = f(); }
        else if (key == "calib") { d.calib = i(); }
        else if (key == "seed") { d.seed = parse_u64(v, where); }
        else { known = false; }
      } else if (section == "train") {
        if (key == "method") { t.method = train::parse_method(v); }
        else if (key == "k") { t.k_supervised = i(); }
        else if (key == "lambda") { t.lambda_cons = f(); }
        else if (key == "sigma_range") { t.noise_range = parse_sigma_range(v); }
        else if (key == "aug_prob") { t.aug_prob = f(); }
        else if (key == "ratio") { std::tie(t.ratio_sup, t.ratio_unsup) = parse_ratio(v); }
        else if (key == "sampling") {
          if (v == "balanced") { t.sampling = train::Sampling::balanced; }
          else if (v == "random") { t.sampling = train::Sampling::random; }
          else { throw ConfigError(where + ": expected 'balanced' or 'random'"); }
        }
        else if (key == "steps") { t.steps = parse_long(v, where); }
        else if (key == "seed") { t.seed = parse_u64(v, where); }
        else if (key == "depth") { t.net.depth = i(); }
        else if (key == "base_channels") { t.net.base_channels = i(); }
        else if (key == "lr") { t.adam.lr = f(); }
        else if (key == "beta1") { t.adam.beta1 = f(); }
        else if (key == "beta2") { t.adam.beta2 = f(); }
        else if (key == "adam_eps") { t.adam.eps = f(); }
        else if (key == "val_every") { t.val_every = i(); }
        else { known = false; }
      } else if (section == "eval") {
        if (key == "sigma_test") { ev.sigma_test = parse_list(v); }
        else if (key == "accel_test") { ev.accel_test = parse_list(v); }
        else if (key == "mask_seed") { ev.mask_seed = parse_u64(v, where); }
        else if (key == "cs_lambda") {
          if (v == "schedule") { ev.cs_lambda.reset(); } else { ev.cs_lambda = f(); }
        }
        else if (key == "cs_iters") { ev.cs_iters = i(); }
        else { known = false; }
      } else {
        throw ConfigError("config: unknown section [" + section + "]");
      }
      if (!known) { throw ConfigError("config: unknown key '" + key + "' in [" + section + "]"); }
    }
  }
  t.mask = {d.accel, d.calib};
  t.validate();
  for (double s : ev.sigma_test) {
    if (!(s >= 0.0)) { throw ConfigError("eval.sigma_test entries must be >= 0"); }
  }
  for (double r : ev.accel_test) {
    if (!(r >= 1.0)) { throw ConfigError("eval.accel_test entries must be >= 1"); }
  }
  if (ev.cs_iters < 1) { throw ConfigError("eval.cs_iters must be >= 1"); }
  if (d.train_scans < 1 || d.val_scans < 1 || d.test_scans < 1 || d.slices < 1 || d.ncoils < 1) {
    throw ConfigError("dataset: scan, slice and coil counts must be >= 1");
  }
  if (!is_power_of_two(d.height) || !is_power_of_two(d.width) || d.height < 8 || d.width < 8) {
    throw ConfigError("dataset: height and width must be powers of two >= 8");
  }
  return cfg;
}

ExperimentConfig load_config(fs::path const &path)
{
  std::ifstream is(path);
  if (!is) { throw ConfigError("cannot open config " + path.string()); }
  return parse_config(is);
}

void write_config(std::ostream &os, ExperimentConfig const &cfg)
{
  auto const &d = cfg.data;
  auto const &t = cfg.train;
  auto const &e = cfg.eval;
  os << "[dataset]\n"
     << "height=" << d.height << "\nwidth=" << d.width << "\ncoils=" << d.ncoils << "\nslices=" << d.slices
     << "\ntrain_scans=" << d.train_scans << "\nval_scans=" << d.val_scans << "\ntest_scans=" << d.test_scans
     << "\naccel=" << num(d.accel) << "\ncalib=" << d.calib << "\nseed=" << d.seed << "\n\n";
  os << "[train]\n"
     << "method=" << train::to_string(t.method) << "\nk=" << t.k_supervised << "\nlambda=" << num(t.lambda_cons)
     << "\nsigma_range=" << num(t.noise_range.lo) << ":" << num(t.noise_range.hi) << "\naug_prob=" << num(t.aug_prob)
     << "\nratio=" << t.ratio_sup << ":" << t.ratio_unsup
     << "\nsampling=" << (t.sampling == train::Sampling::balanced ? "balanced" : "random") << "\nsteps=" << t.steps
     << "\nseed=" << t.seed << "\ndepth=" << t.net.depth << "\nbase_channels=" << t.net.base_channels
     << "\nlr=" << num(t.adam.lr) << "\nbeta1=" << num(t.adam.beta1) << "\nbeta2=" << num(t.adam.beta2)
     << "\nadam_eps=" << num(t.adam.eps) << "\nval_every=" << t.val_every << "\n\n";
  os << "[eval]\n"
     << "sigma_test=" << join(e.sigma_test) << "\naccel_test=" << join(e.accel_test) << "\nmask_seed=" << e.mask_seed
     << "\ncs_lambda=" << (e.cs_lambda ? num(*e.cs_lambda) : std::string("schedule")) << "\ncs_iters=" << e.cs_iters
     << "\n";
}

// ------------------------------------------------------------------ dataset

std::string to_string(Split s)
{
  switch (s) {
  case Split::train: return "train";
  case Split::val: return "val";
  case Split::test: return "test";
  }
  return "?";
}

std::vector<ScanEntry> DatasetManifest::of(Split s) const
{
  std::vector<ScanEntry> out;
  std::copy_if(scans.begin(), scans.end(), std::back_inserter(out), [s](auto const &e) { return e.split == s; });
  return out;
}

std::vector<int> DatasetManifest::supervised_scans(int k) const
{
  auto const tr = of(Split::train);
  if (k < 0 || k > static_cast<int>(tr.size())) {
    throw ConfigError(fmt::format("k={} but the dataset has {} training scans", k, tr.size()));
  }
  std::vector<int> ids;
  for (auto const &e : tr) {
    ids.push_back(e.scan_id);
  }
  std::sort(ids.begin(), ids.end());
  ids.resize(static_cast<std::size_t>(k));
  return ids;
}

DatasetManifest make_manifest(DatasetConfig const &cfg)
{
  DatasetManifest m{cfg, {}};
  int id = 0;
  auto add = [&](Split s, int n) {
    for (int i = 0; i < n; ++i, ++id) {
      m.scans.push_back({id, s, cfg.slices, fmt::format("scans/scan_{:03d}.n2rt", id),
                         derive_seed(cfg.seed, {kSeedMask, static_cast<std::uint64_t>(id)})});
    }
  };
  add(Split::train, cfg.train_scans);
  add(Split::val, cfg.val_scans);
  add(Split::test, cfg.test_scans);
  return m;
}

SamplingMask test_mask(DatasetManifest const &m, int scan_id, double accel, std::uint64_t mask_seed)
{
  auto const &c = m.config;
  return make_poisson_disc_mask(c.height, c.width, accel, c.calib,
                                derive_seed(mask_seed, {static_cast<std::uint64_t>(scan_id), bits(accel)}));
}

Scan synthesize_scan(DatasetManifest const &m, ScanEntry const &e, std::uint64_t test_mask_seed)
{
  auto const &c = m.config;
  auto const id = static_cast<std::uint64_t>(e.scan_id);
  Scan s{e, {}, make_coil_sensitivities(c.height, c.width, c.ncoils, derive_seed(c.seed, {kSeedCoils, id})), {}};
  for (int sl = 0; sl < e.slices; ++sl) {
    s.slices.push_back(make_phantom(c.height, c.width, derive_seed(c.seed, {kSeedPhantom, id, static_cast<std::uint64_t>(sl)})));
  }
  s.mask = e.split == Split::test ? test_mask(m, e.scan_id, c.accel, test_mask_seed)
                                  : make_poisson_disc_mask(c.height, c.width, c.accel, c.calib, e.mask_seed);
  return s;
}

namespace {

json manifest_json(DatasetManifest const &m, std::uint64_t test_mask_seed)
{
  auto const &c = m.config;
  json j;
  j["format"] = "n2r-dataset";
  j["version"] = 1;
  j["height"] = c.height;
  j["width"] = c.width;
  j["ncoils"] = c.ncoils;
  j["slices"] = c.slices;
  j["accel"] = c.accel;
  j["calib"] = c.calib;
  j["seed"] = c.seed;
  j["test_mask_seed"] = test_mask_seed;
  j["scans"] = json::array();
  for (auto const &e : m.scans) {
    j["scans"].push_back({{"scan_id", e.scan_id},
                          {"split", to_string(e.split)},
                          {"slices", e.slices},
                          {"file", e.file},
                          {"mask_seed", e.mask_seed}});
  }
  return j;
}

} // namespace

void simulate(ExperimentConfig const &cfg, fs::path const &out, bool force)
{
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!force) { throw ConfigError("output directory " + out.string() + " exists; pass --force to overwrite"); }
    fs::remove(out / kManifestFile);
    fs::remove_all(out / "scans");
  }
  fs::create_directories(out / "scans");
  auto const m = make_manifest(cfg.data);
  for (auto const &e : m.scans) {
    Scan const s = synthesize_scan(m, e, cfg.eval.mask_seed);
    auto const &c = m.config;
    std::vector<Complex> stack;
    for (auto const &img : s.slices) {
      stack.insert(stack.end(), img.data().begin(), img.data().end());
    }
    std::vector<float> mask(s.mask.data().begin(), s.mask.data().end());
    auto const h = static_cast<std::uint64_t>(c.height), w = static_cast<std::uint64_t>(c.width);
    io::Archive a;
    a.add("target", io::from_complex(stack, {static_cast<std::uint64_t>(e.slices), h, w}));
    a.add("sens", io::from_complex(s.sens.data(), {static_cast<std::uint64_t>(c.ncoils), h, w}));
    a.add("mask", io::from_float(std::span<float const>(mask), {h, w}));
    std::vector<float> const meta{static_cast<float>(s.mask.acceleration()), static_cast<float>(s.mask.calib_size())};
    a.add("mask_meta", io::from_float(std::span<float const>(meta), {2}));
    io::save_archive(out / e.file, a);
  }
  write_text(out / kManifestFile, manifest_json(m, cfg.eval.mask_seed).dump(2) + "\n");
}

DatasetManifest load_manifest(fs::path const &dir)
{
  std::ifstream is(dir / kManifestFile);
  if (!is) { throw ConfigError("no dataset manifest in " + dir.string() + " (run 'simulate' first)"); }
  try {
    json const j = json::parse(is);
    DatasetManifest m;
    auto &c = m.config;
    c.height = j.at("height").get<int>();
    c.width = j.at("width").get<int>();
    c.ncoils = j.at("ncoils").get<int>();
    c.slices = j.at("slices").get<int>();
    c.accel = j.at("accel").get<double>();
    c.calib = j.at("calib").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    for (auto const &s : j.at("scans")) {
      ScanEntry e;
      e.scan_id = s.at("scan_id").get<int>();
      auto const split = s.at("split").get<std::string>();
      if (split == "train") { e.split = Split::train; }
      else if (split == "val") { e.split = Split::val; }
      else if (split == "test") { e.split = Split::test; }
      else { throw ParseError("manifest: unknown split '" + split + "'"); }
      e.slices = s.at("slices").get<int>();
      e.file = s.at("file").get<std::string>();
      e.mask_seed = s.at("mask_seed").get<std::uint64_t>();
      m.scans.push_back(e);
    }
    c.train_scans = static_cast<int>(m.of(Split::train).size());
    c.val_scans = static_cast<int>(m.of(Split::val).size());
    c.test_scans = static_cast<int>(m.of(Split::test).size());
    return m;
  } catch (json::exception const &e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

Scan load_scan(fs::path const &dir, ScanEntry const &e)
{
  io::Archive const a = io::load_archive(dir / e.file);
  auto const &t = a.at("target");
  auto const &s = a.at("sens");
  auto const &mk = a.at("mask");
  if (t.dims.size() != 3 || s.dims.size() != 3 || mk.dims.size() != 2) {
    throw ParseError("scan file " + e.file + ": unexpected tensor ranks");
  }
  int const n = static_cast<int>(t.dims[0]), h = static_cast<int>(t.dims[1]), w = static_cast<int>(t.dims[2]);
  auto const tv = io::to_complex(t);
  Scan scan;
  scan.entry = e;
  std::size_t const plane = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    scan.slices.emplace_back(h, w, std::vector<Complex>(tv.begin() + i * plane, tv.begin() + (i + 1) * plane));
  }
  scan.sens = CoilSensitivities(static_cast<int>(s.dims[0]), h, w, io::to_complex(s));
  std::vector<std::uint8_t> mvals;
  for (float f : mk.values) {
    mvals.push_back(f != 0.0f ? 1 : 0);
  }
  auto const &meta = a.at("mask_meta").values;
  if (meta.size() != 2) { throw ParseError("scan file " + e.file + ": bad mask_meta"); }
  scan.mask = SamplingMask(h, w, std::move(mvals), meta[0], static_cast<int>(meta[1]));
  return scan;
}

train::Datasets make_datasets(fs::path const &dir, DatasetManifest const &m, int k)
{
  auto const sup_ids = m.supervised_scans(k);
  train::Datasets d;
  auto const full = SamplingMask::full(m.config.height, m.config.width);
  for (auto const &e : m.scans) {
    if (e.split == Split::test) { continue; }
    Scan const s = load_scan(dir, e);
    bool const supervised =
      e.split == Split::val || std::find(sup_ids.begin(), sup_ids.end(), e.scan_id) != sup_ids.end();
    for (int sl = 0; sl < static_cast<int>(s.slices.size()); ++sl) {
      auto const &x = s.slices[static_cast<std::size_t>(sl)];
      if (supervised) {
        train::Example ex{forward_model(x, s.sens, full), s.sens, x, s.mask, e.scan_id, sl};
        (e.split == Split::val ? d.val : d.sup).push_back(std::move(ex));
      } else {
        d.unsup.push_back({forward_model(x, s.sens, s.mask), s.sens, std::nullopt, s.mask, e.scan_id, sl});
      }
    }
  }
  return d;
}

// ------------------------------------------------------------------- train

namespace {

void truncate_loss_csv(fs::path const &p, long upto)
{
  std::ifstream is(p);
  std::string line, kept;
  bool header = true;
  while (std::getline(is, line)) {
    if (header) {
      kept += line + "\n";
      header = false;
      continue;
    }
    auto const comma = line.find(',');
    if (comma == std::string::npos) { continue; }
    if (parse_long(line.substr(0, comma), "loss.csv step") <= upto) { kept += line + "\n"; }
  }
  is.close();
  write_text(p, kept);
}

} // namespace

TrainOutput train(ExperimentConfig const &cfg_in, fs::path const &dataset, fs::path const &out, bool force,
                  std::optional<long> stop_after)
{
  auto const m = load_manifest(dataset);
  ExperimentConfig cfg = cfg_in;
  cfg.data = m.config;
  cfg.train.mask = {m.config.accel, m.config.calib};
  cfg.train.validate();
  if (cfg.train.method == train::Method::noise2recon && cfg.train.k_supervised >= m.config.train_scans) {
    throw ConfigError(fmt::format("noise2recon with k={} leaves no unsupervised scans out of {}", cfg.train.k_supervised,
                                  m.config.train_scans));
  }
  auto const data = make_datasets(dataset, m, cfg.train.k_supervised);

  fs::create_directories(out);
  TrainOutput res{out / kCheckpointFile, out / kLossFile, out / kResolvedConfigFile, 0};
  if (force) {
    fs::remove(res.checkpoint);
    fs::remove(res.loss_csv);
  }

  std::optional<train::Trainer> trainer;
  if (fs::exists(res.checkpoint)) {
    auto const info = train::read_checkpoint_info(res.checkpoint);
    if (info.step >= cfg.train.steps) {
      throw ConfigError("training in " + out.string() + " is already complete; pass --force to retrain");
    }
    trainer.emplace(train::Trainer::load(res.checkpoint, cfg.train, data));
    res.resumed_from = info.step;
    truncate_loss_csv(res.loss_csv, info.step);
  } else {
    trainer.emplace(cfg.train, data);
    write_text(res.loss_csv, std::string(train::kLossCsvHeader) + "\n");
  }
  {
    std::ofstream os(res.config);
    write_config(os, cfg);
  }

  std::ofstream log(res.loss_csv, std::ios::app);
  auto sink = [&](train::LossRow const &r) { log << train::format_loss_row(r) << '\n'; };
  long const limit = stop_after ? std::min(*stop_after, cfg.train.steps) : cfg.train.steps;
  while (trainer->state().step < limit) {
    long const every = cfg.train.val_every;
    long const next = std::min(limit, (trainer->state().step / every + 1) * every);
    trainer->run(next, sink);
    log.flush();
    trainer->save(res.checkpoint);
  }
  return res;
}

// -------------------------------------------------------------------- eval

Reconstructor model_reconstructor(fs::path const &checkpoint)
{
  auto const info = train::read_checkpoint_info(checkpoint);
  auto params = std::make_shared<nn::ModelParams<float> const>(train::load_model(checkpoint));
  return {train::to_string(info.method), info.k, info.R_train,
          [params](KSpace const &y, CoilSensitivities const &s, ComplexImage const &, double) {
            return train::reconstruct(*params, y, s);
          }};
}

Reconstructor cs_reconstructor(EvalConfig const &eval, double R_train)
{
  return {"cs", 0, R_train, [eval](KSpace const &y, CoilSensitivities const &s, ComplexImage const &, double sigma) {
            // Solve on p95-normalised data so lambda is scale free.
            double const scale = magnitude_percentile(adjoint_sense(y, s), 95.0);
            if (!(scale > 0.0)) { throw DegenerateInputError("cs: zero-filled image is all zero"); }
            CSConfig c;
            c.lambda = eval.cs_lambda ? *eval.cs_lambda : cs_lambda_schedule(y.mask().acceleration(), sigma);
            c.iters = eval.cs_iters;
            return scaled(cs_reconstruct(y.scaled(1.0 / scale), s, c), scale);
          }};
}

Reconstructor zero_filled_reconstructor()
{
  return {"zero_filled", 0, 0.0,
          [](KSpace const &y, CoilSensitivities const &s, ComplexImage const &, double) { return adjoint_sense(y, s); }};
}

Reconstructor oracle_reconstructor()
{
  return {"oracle", 0, 0.0,
          [](KSpace const &, CoilSensitivities const &, ComplexImage const &target, double) { return target; }};
}

namespace {

struct Cell
{
  std::size_t scan;
  int slice;
  double accel;
  double sigma;
};

KSpace test_input(DatasetManifest const &m, Scan const &s, SamplingMask const &mask, int slice, double sigma,
                  std::uint64_t mask_seed)
{
  auto const &x = s.slices[static_cast<std::size_t>(slice)];
  KSpace const y = forward_model(x, s.sens, mask);
  (void)m;
  std::uint64_t const seed = derive_seed(mask_seed, {kSeedTestNoise, static_cast<std::uint64_t>(s.entry.scan_id),
                                                     static_cast<std::uint64_t>(slice), bits(mask.acceleration()),
                                                     bits(sigma)});
  return add_masked_noise(y, {sigma, seed}, adjoint_sense(y, s.sens));
}

} // namespace

std::vector<metrics::MetricRecord> evaluate(fs::path const &dataset, EvalConfig const &eval,
                                            std::vector<Reconstructor> const &recons)
{
  for (double s : eval.sigma_test) {
    if (!(s >= 0.0)) { throw ConfigError(fmt::format("sigma_test {} must be >= 0", s)); }
  }
  auto const m = load_manifest(dataset);
  std::vector<Scan> scans;
  for (auto const &e : m.of(Split::test)) {
    scans.push_back(load_scan(dataset, e));
  }
  // Masks are per volume: one per (scan, R_test).
  std::vector<std::vector<SamplingMask>> masks(scans.size());
  for (std::size_t i = 0; i < scans.size(); ++i) {
    for (double r : eval.accel_test) {
      masks[i].push_back(test_mask(m, scans[i].entry.scan_id, r, eval.mask_seed));
    }
  }

  std::vector<Cell> cells;
  for (std::size_t ri = 0; ri < eval.accel_test.size(); ++ri) {
    for (double sigma : eval.sigma_test) {
      for (std::size_t si = 0; si < scans.size(); ++si) {
        for (int sl = 0; sl < static_cast<int>(scans[si].slices.size()); ++sl) {
          cells.push_back({si, sl, static_cast<double>(ri), sigma});
        }
      }
    }
  }
  std::vector<std::vector<metrics::MetricRecord>> results(cells.size());
  parallel_for(cells.size(), [&](std::size_t c) {
    auto const &cell = cells[c];
    auto const ri = static_cast<std::size_t>(cell.accel);
    Scan const &s = scans[cell.scan];
    auto const &target = s.slices[static_cast<std::size_t>(cell.slice)];
    KSpace const y = test_input(m, s, masks[cell.scan][ri], cell.slice, cell.sigma, eval.mask_seed);
    for (auto const &r : recons) {
      auto rec = metrics::score(r.run(y, s.sens, target, cell.sigma), target);
      rec.method = r.method;
      rec.k = r.k;
      rec.R_train = r.R_train;
      rec.R_test = eval.accel_test[ri];
      rec.sigma_test = cell.sigma;
      rec.scan_id = s.entry.scan_id;
      rec.slice_id = cell.slice;
      results[c].push_back(std::move(rec));
    }
  });
  std::vector<metrics::MetricRecord> out;
  for (std::size_t r = 0; r < recons.size(); ++r) {
    for (auto const &row : results) {
      out.push_back(row[r]);
    }
  }
  return out;
}

void write_metrics(fs::path const &path, std::vector<metrics::MetricRecord> const &records)
{
  std::ofstream os(path, std::ios::trunc);
  if (!os) { throw ConfigError("cannot write " + path.string()); }
  metrics::write_csv(os, records);
}

std::vector<metrics::MetricRecord> run_cs(fs::path const &dataset, EvalConfig const &eval, double accel,
                                          fs::path const &out)
{
  auto const m = load_manifest(dataset);
  auto const cs = cs_reconstructor(eval, m.config.accel);
  fs::create_directories(out);
  std::vector<metrics::MetricRecord> records;
  for (auto const &e : m.of(Split::test)) {
    Scan const s = load_scan(dataset, e);
    SamplingMask const mask = test_mask(m, e.scan_id, accel, eval.mask_seed);
    io::Archive a;
    for (double sigma : eval.sigma_test) {
      std::vector<ComplexImage> recon(s.slices.size());
      parallel_for(s.slices.size(), [&](std::size_t sl) {
        KSpace const y = test_input(m, s, mask, static_cast<int>(sl), sigma, eval.mask_seed);
        recon[sl] = cs.run(y, s.sens, s.slices[sl], sigma);
      });
      std::vector<Complex> stack;
      for (std::size_t sl = 0; sl < recon.size(); ++sl) {
        stack.insert(stack.end(), recon[sl].data().begin(), recon[sl].data().end());
        auto rec = metrics::score(recon[sl], s.slices[sl]);
        rec.method = cs.method;
        rec.R_train = m.config.accel;
        rec.R_test = accel;
        rec.sigma_test = sigma;
        rec.scan_id = e.scan_id;
        rec.slice_id = static_cast<int>(sl);
        records.push_back(std::move(rec));
      }
      a.add(fmt::format("recon_sigma{}", num(sigma)),
            io::from_complex(stack, {recon.size(), static_cast<std::uint64_t>(m.config.height),
                                     static_cast<std::uint64_t>(m.config.width)}));
    }
    io::save_archive(out / fmt::format("recon_{:03d}.n2rt", e.scan_id), a);
  }
  write_metrics(out / "metrics.csv", records);
  return records;
}

std::string report(std::vector<fs::path> const &csvs, fs::path const &out)
{
  if (csvs.empty()) { throw UsageError("report: no CSV files given"); }
  std::vector<metrics::MetricRecord> all;
  for (auto const &p : csvs) {
    std::ifstream is(p);
    if (!is) { throw ConfigError("cannot open " + p.string()); }
    try {
      auto rows = metrics::read_csv(is);
      all.insert(all.end(), rows.begin(), rows.end());
    } catch (ParseError const &e) {
      throw ParseError(p.string() + ": " + e.what());
    }
  }
  auto const rows = metrics::aggregate(all);
  std::string const table = metrics::format_table(rows);
  if (!out.empty()) {
    fs::create_directories(out);
    write_text(out / "table.txt", table);
    std::ofstream os(out / "series.csv", std::ios::trunc);
    metrics::write_series_csv(os, rows);
  }
  return table;
}

// ---------------------------------------------------------------- threads

int thread_count()
{
  if (char const *env = std::getenv("N2R_THREADS"); env && *env) {
    long const n = parse_long(env, "N2R_THREADS");
    if (n < 1) { throw ConfigError("N2R_THREADS must be >= 1"); }
    return static_cast<int>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::function<void(std::size_t)> const &f)
{
  std::size_t const workers = std::min<std::size_t>(n, static_cast<std::size_t>(thread_count()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      f(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) { error = std::current_exception(); }
          next = n;
        }
      }
    });
  }
  for (auto &t : pool) {
    t.join();
  }
  if (error) { std::rethrow_exception(error); }
}

} // namespace n2r::harness
