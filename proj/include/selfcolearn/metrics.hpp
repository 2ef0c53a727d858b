#pragma once

#include "tensor.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace scl {

struct MetricsRecord
{
  std::string sequence_id;
  double mse = 0.0;
  double psnr_db = 0.0; // +infinity when mse == 0
  double ssim = 0.0;
};

/// Magnitude-image metrics of a reconstruction against its reference.
/// MSE is a mean over all voxels; PSNR uses the reference peak magnitude;
/// SSIM uses global statistics per frame (population variances), averaged
/// over the leading axis of [T, H, W] inputs. A rank-2 input is one frame.
auto evaluate_pair(Tensor const &rec, Tensor const &ref, std::string sequence_id = {}) -> MetricsRecord;

/// SSIM of two real frames given the dynamic range.
auto ssim_frame(std::span<double const> x, std::span<double const> y, double max_value) -> double;

struct SummaryStats
{
  double mean = 0.0;
  double std = 0.0; // population
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  std::size_t n = 0;
};

/// Linear-interpolation percentile, p in [0, 1].
auto percentile(std::vector<double> values, double p) -> double;
auto summarize(std::vector<double> const &values) -> SummaryStats;

struct MetricsSummary
{
  SummaryStats mse;
  SummaryStats psnr_db;
  SummaryStats ssim;
};

auto summarize(std::vector<MetricsRecord> const &records) -> MetricsSummary;

/// Shortest round-trip text of a double; "inf" / "-inf" / "nan" otherwise.
auto format_number(double v) -> std::string;

// metrics.csv: sequence_id,mse,psnr_db,ssim
// summary.csv: metric,mean,std,median,q25,q75,n
void write_metrics_csv(std::filesystem::path const &path, std::vector<MetricsRecord> const &records);
void write_summary_csv(std::filesystem::path const &path, MetricsSummary const &summary);

/// Writes text to a file, throwing Error with the path on failure.
void write_text(std::filesystem::path const &path, std::string const &text);

} // namespace scl
