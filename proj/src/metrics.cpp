#include "selfcolearn/metrics.hpp"

#include "selfcolearn/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <limits>
#include <numeric>

namespace scl {

namespace {

auto magnitudes(Tensor const &t) -> std::vector<double>
{
  std::vector<double> out(t.numel());
  auto const d = t.data();
  for (std::size_t i = 0; i < out.size(); ++i) { out[i] = std::abs(d[i]); }
  return out;
}

auto mean_of(std::span<double const> v) -> double
{
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

auto ssim_frame(std::span<double const> x, std::span<double const> y, double max_value) -> double
{
  if (x.size() != y.size() || x.empty()) { throw ShapeError("ssim_frame: frames must be equal and non-empty"); }
  double const mx = mean_of(x);
  double const my = mean_of(y);
  double vx = 0.0;
  double vy = 0.0;
  double cxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
    cxy += (x[i] - mx) * (y[i] - my);
  }
  auto const n = static_cast<double>(x.size());
  vx /= n;
  vy /= n;
  cxy /= n;
  double const c1 = (0.01 * max_value) * (0.01 * max_value);
  double const c2 = (0.03 * max_value) * (0.03 * max_value);
  return ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

auto evaluate_pair(Tensor const &rec, Tensor const &ref, std::string sequence_id) -> MetricsRecord
{
  if (rec.shape() != ref.shape()) {
    throw ShapeError(fmt::format("evaluate_pair: shapes {} and {} differ", shape_string(rec.shape()),
                                 shape_string(ref.shape())));
  }
  if (ref.rank() < 2) { throw ShapeError("evaluate_pair: need [H, W] or [T, H, W] images"); }
  auto const a = magnitudes(rec);
  auto const b = magnitudes(ref);
  double const peak = *std::max_element(b.begin(), b.end());
  if (peak <= 0.0) { throw NumericError(fmt::format("evaluate_pair: reference '{}' is all zero", sequence_id)); }

  MetricsRecord r;
  r.sequence_id = std::move(sequence_id);
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) { sq += (a[i] - b[i]) * (a[i] - b[i]); }
  r.mse = sq / static_cast<double>(a.size());
  r.psnr_db = r.mse > 0.0 ? 20.0 * std::log10(peak / std::sqrt(r.mse)) : std::numeric_limits<double>::infinity();

  auto const frame = ref.dim(ref.rank() - 1) * ref.dim(ref.rank() - 2);
  auto const frames = a.size() / frame;
  double total = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    total += ssim_frame(std::span(a).subspan(t * frame, frame), std::span(b).subspan(t * frame, frame), peak);
  }
  r.ssim = total / static_cast<double>(frames);
  return r;
}

auto percentile(std::vector<double> values, double p) -> double
{
  if (values.empty()) { throw Error("percentile of an empty set"); }
  std::sort(values.begin(), values.end());
  double const pos = p * static_cast<double>(values.size() - 1);
  auto const lo = static_cast<std::size_t>(std::floor(pos));
  auto const hi = std::min(lo + 1, values.size() - 1);
  double const frac = pos - static_cast<double>(lo);
  if (frac == 0.0) { return values[lo]; }
  return values[lo] + frac * (values[hi] - values[lo]);
}

auto summarize(std::vector<double> const &values) -> SummaryStats
{
  if (values.empty()) { throw Error("summarize: no records"); }
  SummaryStats s;
  s.n = values.size();
  auto sorted = values;
  std::sort(sorted.begin(), sorted.end());
  s.mean = mean_of(sorted);
  if (std::isinf(s.mean)) {
    s.std = 0.0;
  } else {
    double acc = 0.0;
    for (double v : sorted) { acc += (v - s.mean) * (v - s.mean); }
    s.std = std::sqrt(acc / static_cast<double>(s.n));
  }
  s.median = percentile(sorted, 0.5);
  s.q25 = percentile(sorted, 0.25);
  s.q75 = percentile(sorted, 0.75);
  return s;
}

auto summarize(std::vector<MetricsRecord> const &records) -> MetricsSummary
{
  std::vector<double> mse;
  std::vector<double> psnr;
  std::vector<double> ssim;
  for (auto const &r : records) {
    mse.push_back(r.mse);
    psnr.push_back(r.psnr_db);
    ssim.push_back(r.ssim);
  }
  return {summarize(mse), summarize(psnr), summarize(ssim)};
}

auto format_number(double v) -> std::string
{
  if (std::isnan(v)) { return "nan"; }
  if (std::isinf(v)) { return v > 0 ? "inf" : "-inf"; }
  std::array<char, 64> buf{};
  auto const res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

void write_text(std::filesystem::path const &path, std::string const &text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) { throw Error(fmt::format("cannot open '{}' for writing", path.string())); }
  out << text;
  if (!out) { throw Error(fmt::format("failed writing '{}'", path.string())); }
}

void write_metrics_csv(std::filesystem::path const &path, std::vector<MetricsRecord> const &records)
{
  std::string text = "sequence_id,mse,psnr_db,ssim\n";
  for (auto const &r : records) {
    text += fmt::format("{},{},{},{}\n", r.sequence_id, format_number(r.mse), format_number(r.psnr_db),
                        format_number(r.ssim));
  }
  write_text(path, text);
}

void write_summary_csv(std::filesystem::path const &path, MetricsSummary const &summary)
{
  std::string text = "metric,mean,std,median,q25,q75,n\n";
  auto row = [&](char const *name, SummaryStats const &s) {
    text += fmt::format("{},{},{},{},{},{},{}\n", name, format_number(s.mean), format_number(s.std),
                        format_number(s.median), format_number(s.q25), format_number(s.q75), s.n);
  };
  row("mse", summary.mse);
  row("psnr_db", summary.psnr_db);
  row("ssim", summary.ssim);
  write_text(path, text);
}

} // namespace scl
