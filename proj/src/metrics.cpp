#include "n2r/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace n2r::metrics {

namespace {

void check_pair(std::span<double const> x, std::span<double const> ref, char const *op)
{
  if (x.size() != ref.size()) {
    throw DimensionError(fmt::format("{}: size mismatch ({} vs {})", op, x.size(), ref.size()));
  }
  if (ref.empty()) { throw DimensionError(fmt::format("{}: empty images", op)); }
}

std::vector<double> mag(ComplexImage const &x)
{
  std::vector<double> m(x.size());
  std::transform(x.data().begin(), x.data().end(), m.begin(), [](Complex z) { return std::abs(z); });
  return m;
}

void check_shape(ComplexImage const &x, ComplexImage const &ref, char const *op)
{
  if (x.height() != ref.height() || x.width() != ref.width()) {
    throw DimensionError(fmt::format("{}: shape mismatch", op));
  }
}

std::string number(double v)
{
  if (std::isinf(v)) { return v > 0 ? "inf" : "-inf"; }
  return fmt::format("{}", v);
}

} // namespace

double psnr(std::span<double const> x, std::span<double const> ref)
{
  check_pair(x, ref, "psnr");
  double peak = 0.0, se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    peak = std::max(peak, ref[i]);
    se += (x[i] - ref[i]) * (x[i] - ref[i]);
  }
  if (!(peak > 0.0)) { throw DegenerateInputError("psnr: reference has no positive peak"); }
  if (se == 0.0) { return kPsnrIdentical; }
  return 20.0 * std::log10(peak / std::sqrt(se / static_cast<double>(x.size())));
}

double nrmse(std::span<double const> x, std::span<double const> ref)
{
  check_pair(x, ref, "nrmse");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - ref[i]) * (x[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  if (!(den > 0.0)) { throw DegenerateInputError("nrmse: zero reference"); }
  return std::sqrt(num / den);
}

double ssim(std::span<double const> x, std::span<double const> ref, int height, int width)
{
  check_pair(x, ref, "ssim");
  if (static_cast<std::size_t>(height) * width != x.size()) { throw DimensionError("ssim: shape does not match data"); }
  if (height < kSsimWindow || width < kSsimWindow) {
    throw DimensionError(fmt::format("ssim: {}x{} image smaller than the {}x{} window", height, width, kSsimWindow,
                                     kSsimWindow));
  }
  double const range = *std::max_element(ref.begin(), ref.end());
  if (!(range > 0.0)) { throw DegenerateInputError("ssim: reference has zero data range"); }
  double const c1 = (kSsimK1 * range) * (kSsimK1 * range);
  double const c2 = (kSsimK2 * range) * (kSsimK2 * range);
  double const n = kSsimWindow * kSsimWindow;

  double total = 0.0;
  int windows = 0;
  for (int y0 = 0; y0 + kSsimWindow <= height; ++y0) {
    for (int x0 = 0; x0 + kSsimWindow <= width; ++x0) {
      double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
      for (int dy = 0; dy < kSsimWindow; ++dy) {
        std::size_t const row = static_cast<std::size_t>(y0 + dy) * width + x0;
        for (int dx = 0; dx < kSsimWindow; ++dx) {
          double const a = x[row + dx], b = ref[row + dx];
          sa += a;
          sb += b;
          saa += a * a;
          sbb += b * b;
          sab += a * b;
        }
      }
      double const ma = sa / n, mb = sb / n;
      double const va = saa / n - ma * ma, vb = sbb / n - mb * mb, cov = sab / n - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  }
  return total / windows;
}

double psnr(ComplexImage const &x, ComplexImage const &ref)
{
  check_shape(x, ref, "psnr");
  return psnr(mag(x), mag(ref));
}

double nrmse(ComplexImage const &x, ComplexImage const &ref)
{
  check_shape(x, ref, "nrmse");
  return nrmse(mag(x), mag(ref));
}

double ssim(ComplexImage const &x, ComplexImage const &ref)
{
  check_shape(x, ref, "ssim");
  return ssim(mag(x), mag(ref), ref.height(), ref.width());
}

MetricRecord score(ComplexImage const &recon, ComplexImage const &ref)
{
  check_shape(recon, ref, "score");
  auto const a = mag(recon), b = mag(ref);
  MetricRecord r;
  r.ssim = ssim(a, b, ref.height(), ref.width());
  r.nrmse = nrmse(a, b);
  r.psnr_db = psnr(a, b);
  return r;
}

void write_csv(std::ostream &os, std::vector<MetricRecord> const &records)
{
  os << kCsvHeader << '\n';
  for (auto const &r : records) {
    os << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.method, r.k, number(r.R_train), number(r.R_test),
                      number(r.sigma_test), r.scan_id, r.slice_id, number(r.ssim), number(r.nrmse), number(r.psnr_db));
  }
}

std::vector<MetricRecord> read_csv(std::istream &is)
{
  static constexpr std::array<char const *, 10> kColumns{"method",   "k",       "R_train", "R_test", "sigma_test",
                                                         "scan_id", "slice_id", "ssim",    "nrmse",  "psnr_db"};
  auto split = [](std::string const &line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) {
      cells.push_back(c);
    }
    if (!line.empty() && line.back() == ',') { cells.emplace_back(); }
    return cells;
  };
  std::string line;
  if (!std::getline(is, line)) { throw ParseError("metrics CSV: empty input"); }
  if (!line.empty() && line.back() == '\r') { line.pop_back(); }
  auto const header = split(line);
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    if (i >= header.size()) { throw ParseError(fmt::format("metrics CSV: missing column '{}'", kColumns[i])); }
    if (header[i] != kColumns[i]) {
      throw ParseError(fmt::format("metrics CSV: column {} is '{}', expected '{}'", i + 1, header[i], kColumns[i]));
    }
  }
  if (header.size() > kColumns.size()) {
    throw ParseError(fmt::format("metrics CSV: unexpected column '{}'", header[kColumns.size()]));
  }

  std::vector<MetricRecord> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') { line.pop_back(); }
    if (line.empty()) { continue; }
    auto const cells = split(line);
    if (cells.size() != kColumns.size()) {
      throw ParseError(fmt::format("metrics CSV line {}: expected {} fields, got {}", lineno, kColumns.size(),
                                   cells.size()));
    }
    auto num = [&](std::size_t i) {
      try {
        std::size_t used = 0;
        double const v = std::stod(cells[i], &used);
        if (used != cells[i].size()) { throw std::invalid_argument(cells[i]); }
        return v;
      } catch (std::exception const &) {
        throw ParseError(fmt::format("metrics CSV line {}: bad value '{}' in column '{}'", lineno, cells[i], kColumns[i]));
      }
    };
    auto integer = [&](std::size_t i) {
      double const v = num(i);
      if (v != std::floor(v)) {
        throw ParseError(fmt::format("metrics CSV line {}: column '{}' must be an integer", lineno, kColumns[i]));
      }
      return static_cast<int>(v);
    };
    MetricRecord r;
    r.method = cells[0];
    r.k = integer(1);
    r.R_train = num(2);
    r.R_test = num(3);
    r.sigma_test = num(4);
    r.scan_id = integer(5);
    r.slice_id = integer(6);
    r.ssim = num(7);
    r.nrmse = num(8);
    r.psnr_db = num(9);
    out.push_back(std::move(r));
  }
  return out;
}

Summary summarize(std::span<double const> v)
{
  if (v.empty()) { throw DegenerateInputError("summarize: empty group"); }
  double m = 0.0;
  for (double x : v) {
    m += x;
  }
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) {
    s += (x - m) * (x - m);
  }
  return {m, std::sqrt(s / static_cast<double>(v.size()))};
}

std::string format_mean_std(Summary const &s, int decimals)
{
  auto one = [&](double v) { return std::isinf(v) ? number(v) : fmt::format("{:.{}f}", v, decimals); };
  return one(s.mean) + " (" + one(s.stddev) + ")";
}

std::vector<AggregateRow> aggregate(std::vector<MetricRecord> const &records)
{
  using Key = std::tuple<std::string, double, double, int, double>;
  std::map<Key, std::vector<MetricRecord const *>> groups;
  for (auto const &r : records) {
    groups[{r.method, r.R_test, r.sigma_test, r.k, r.R_train}].push_back(&r);
  }
  std::vector<AggregateRow> rows;
  for (auto const &[key, members] : groups) {
    std::vector<double> s, n, p;
    for (auto const *m : members) {
      s.push_back(m->ssim);
      n.push_back(m->nrmse);
      p.push_back(m->psnr_db);
    }
    AggregateRow row;
    std::tie(row.method, row.R_test, row.sigma_test, row.k, row.R_train) = key;
    row.count = members.size();
    row.ssim = summarize(s);
    row.nrmse = summarize(n);
    row.psnr_db = summarize(p);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_table(std::vector<AggregateRow> const &rows)
{
  std::string out = fmt::format("{:<28} {:>3} {:>7} {:>6} {:>7} {:>5}  {:<15} {:<15} {:<15}\n", "method", "k", "R_train",
                                "R_test", "sigma", "n", "SSIM", "nRMSE", "pSNR (dB)");
  for (auto const &r : rows) {
    out += fmt::format("{:<28} {:>3} {:>7} {:>6} {:>7} {:>5}  {:<15} {:<15} {:<15}\n", r.method, r.k, number(r.R_train),
                       number(r.R_test), number(r.sigma_test), r.count, format_mean_std(r.ssim, 3),
                       format_mean_std(r.nrmse, 3), format_mean_std(r.psnr_db, 2));
  }
  return out;
}

void write_series_csv(std::ostream &os, std::vector<AggregateRow> const &rows)
{
  os << "method,k,R_train,R_test,sigma_test,metric,mean,std,n\n";
  for (auto const &r : rows) {
    for (auto const &[name, s] : {std::pair{"ssim", r.ssim}, {"nrmse", r.nrmse}, {"psnr_db", r.psnr_db}}) {
      os << fmt::format("{},{},{},{},{},{},{},{},{}\n", r.method, r.k, number(r.R_train), number(r.R_test),
                        number(r.sigma_test), name, number(s.mean), number(s.stddev), r.count);
    }
  }
}

} // namespace n2r::metrics
