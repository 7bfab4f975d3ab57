#pragma once

#include "n2r/kspace.hpp"

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace n2r::metrics {

// Returned by psnr() for identical images; written to CSV as "inf".
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

inline constexpr int kSsimWindow = 7;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

// All metrics compare magnitude images of equal shape, x against ref.
double psnr(std::span<double const> x, std::span<double const> ref);
double nrmse(std::span<double const> x, std::span<double const> ref);
// Mean local SSIM over all valid 7x7 uniform windows, data range max(ref).
double ssim(std::span<double const> x, std::span<double const> ref, int height, int width);

double psnr(ComplexImage const &x, ComplexImage const &ref);
double nrmse(ComplexImage const &x, ComplexImage const &ref);
double ssim(ComplexImage const &x, ComplexImage const &ref);

struct MetricRecord
{
  std::string method;
  int k = 0;
  double R_train = 0.0;
  double R_test = 0.0;
  double sigma_test = 0.0;
  int scan_id = 0;
  int slice_id = 0;
  double ssim = 0.0;
  double nrmse = 0.0;
  double psnr_db = 0.0;
};

MetricRecord score(ComplexImage const &recon, ComplexImage const &ref);

inline constexpr char const *kCsvHeader = "method,k,R_train,R_test,sigma_test,scan_id,slice_id,ssim,nrmse,psnr_db";

void write_csv(std::ostream &os, std::vector<MetricRecord> const &records);
// Throws ParseError naming the offending column on schema or value errors.
std::vector<MetricRecord> read_csv(std::istream &is);

struct Summary
{
  double mean = 0.0;
  double stddev = 0.0; // population
};
Summary summarize(std::span<double const> v);
// "mean (std)" with a fixed number of decimals, e.g. "0.901 (0.018)".
std::string format_mean_std(Summary const &s, int decimals);

struct AggregateRow
{
  std::string method;
  int k = 0;
  double R_train = 0.0;
  double R_test = 0.0;
  double sigma_test = 0.0;
  std::size_t count = 0;
  Summary ssim, nrmse, psnr_db;
};

// Groups by (method, R_test, sigma_test, k, R_train) in that order of
// precedence; rows come back sorted by the same key.
std::vector<AggregateRow> aggregate(std::vector<MetricRecord> const &records);

std::string format_table(std::vector<AggregateRow> const &rows);
// Long format: one line per (group, metric) for plotting tools.
void write_series_csv(std::ostream &os, std::vector<AggregateRow> const &rows);

} // namespace n2r::metrics
