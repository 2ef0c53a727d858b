#include "selfcolearn/kspace.hpp"

#include "selfcolearn/error.hpp"
#include "selfcolearn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

namespace scl {

namespace {

constexpr std::uint64_t kMaskStream = 0x6d61736b;
constexpr std::uint64_t kSplitStream = 0x73706c6974;
constexpr std::uint64_t kNoiseStream = 0x6e6f697365;

void require_rank3(char const *what, Shape const &shape)
{
  if (shape.size() != 3) { throw ShapeError(fmt::format("{}: expected [T,H,W], got {}", what, shape_string(shape))); }
}

void set_row(BinaryMask &m, std::size_t t, std::size_t y, std::uint8_t v)
{
  auto const h = m.shape[1];
  auto const w = m.shape[2];
  std::fill_n(m.bits.begin() + static_cast<std::ptrdiff_t>((t * h + y) * w), w, v);
}

auto sampled_rows_of(BinaryMask const &m, std::size_t t) -> std::vector<std::size_t>
{
  std::vector<std::size_t> rows;
  auto const h = m.shape[1];
  auto const w = m.shape[2];
  for (std::size_t y = 0; y < h; ++y) {
    if (m.bits[(t * h + y) * w]) { rows.push_back(y); }
  }
  return rows;
}

auto rows_contain(BinaryMask const &m, std::size_t t, std::vector<std::size_t> const &rows) -> bool
{
  auto const h = m.shape[1];
  auto const w = m.shape[2];
  for (auto y : rows) {
    auto const begin = m.bits.begin() + static_cast<std::ptrdiff_t>((t * h + y) * w);
    if (!std::all_of(begin, begin + static_cast<std::ptrdiff_t>(w), [](std::uint8_t v) { return v == 1; })) {
      return false;
    }
  }
  return true;
}

auto frame_bits(BinaryMask const &m, std::size_t t) -> std::span<std::uint8_t const>
{
  auto const block = m.shape[1] * m.shape[2];
  return std::span<std::uint8_t const>(m.bits).subspan(t * block, block);
}

} // namespace

auto SamplingMask::at(std::size_t t, std::size_t y, std::size_t x) const -> bool
{
  return mask.bits[(t * height() + y) * width() + x] != 0;
}

auto SamplingMask::row_sampled(std::size_t t, std::size_t y) const -> bool { return rows_contain(mask, t, {y}); }

auto SamplingMask::sampled_rows(std::size_t t) const -> std::vector<std::size_t> { return sampled_rows_of(mask, t); }

auto SamplingMask::achieved_acceleration() const -> double
{
  auto const n = mask.count();
  return n == 0 ? std::numeric_limits<double>::infinity() : static_cast<double>(mask.numel()) / static_cast<double>(n);
}

auto row_frequency(std::size_t row, std::size_t height) -> std::ptrdiff_t
{
  auto const r = static_cast<std::ptrdiff_t>(row);
  auto const h = static_cast<std::ptrdiff_t>(height);
  return r < (h + 1) / 2 ? r : r - h;
}

auto center_rows(std::size_t count, std::size_t height) -> std::vector<std::size_t>
{
  if (count > height) { throw Error(fmt::format("{} centre lines exceed {} rows", count, height)); }
  std::vector<std::size_t> rows;
  auto const h = static_cast<std::ptrdiff_t>(height);
  auto const lo = -static_cast<std::ptrdiff_t>(count / 2);
  for (std::size_t i = 0; i < count; ++i) {
    rows.push_back(static_cast<std::size_t>((lo + static_cast<std::ptrdiff_t>(i) + h) % h));
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

auto gen_mask(AcquisitionConfig const &cfg) -> SamplingMask
{
  if (cfg.frames < 1 || cfg.height < 1 || cfg.width < 1) { throw Error("gen_mask: dimensions must be at least 1"); }
  if (!(cfg.acceleration > 1.0)) {
    throw Error(fmt::format("gen_mask: acceleration must exceed 1, got {}", cfg.acceleration));
  }
  auto const total_rows = cfg.frames * cfg.height;
  auto const budget = static_cast<std::size_t>(std::llround(static_cast<double>(total_rows) / cfg.acceleration));
  if (budget == 0) { throw Error(fmt::format("gen_mask: acceleration {} leaves no rows to sample", cfg.acceleration)); }
  double const achieved = static_cast<double>(total_rows) / static_cast<double>(budget);
  if (std::abs(achieved / cfg.acceleration - 1.0) > 0.1) {
    throw Error(fmt::format("gen_mask: acceleration {} is not reachable within 10% on {} rows (nearest {:.3f})",
                            cfg.acceleration, total_rows, achieved));
  }
  auto const base = budget / cfg.frames;
  auto const extra = budget % cfg.frames;
  if (base < cfg.center_lines) {
    throw Error(fmt::format("gen_mask: budget of {} rows per frame cannot hold {} centre lines", base,
                            cfg.center_lines));
  }
  if (base + (extra > 0 ? 1 : 0) > cfg.height) { throw Error("gen_mask: row budget exceeds the frame height"); }

  Rng rng(mix_seed(cfg.seed, kMaskStream));
  std::vector<std::size_t> order(cfg.frames);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::size_t> counts(cfg.frames, base);
  for (std::size_t i = 0; i < extra; ++i) { counts[order[i]] += 1; }

  SamplingMask out;
  out.mask = BinaryMask({cfg.frames, cfg.height, cfg.width});
  out.acceleration = cfg.acceleration;
  out.center_lines = cfg.center_lines;
  auto const centre = center_rows(cfg.center_lines, cfg.height);
  double const sigma = static_cast<double>(cfg.height) / 4.0;
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    std::vector<std::size_t> candidates;
    std::vector<double> weights;
    for (std::size_t y = 0; y < cfg.height; ++y) {
      if (std::binary_search(centre.begin(), centre.end(), y)) {
        set_row(out.mask, t, y, 1);
        continue;
      }
      auto const f = static_cast<double>(row_frequency(y, cfg.height));
      candidates.push_back(y);
      weights.push_back(std::exp(-f * f / (2.0 * sigma * sigma)));
    }
    for (std::size_t draw = cfg.center_lines; draw < counts[t]; ++draw) {
      double const sum = std::accumulate(weights.begin(), weights.end(), 0.0);
      double target = rng.uniform() * sum;
      std::size_t pick = candidates.size() - 1;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (target < weights[i]) {
          pick = i;
          break;
        }
        target -= weights[i];
      }
      set_row(out.mask, t, candidates[pick], 1);
      candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
      weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  }
  return out;
}

auto split_mask(SamplingMask const &P, std::uint64_t seed, double lowfreq_share) -> MaskTriplet
{
  if (!(lowfreq_share > 0.0 && lowfreq_share <= 1.0)) {
    throw Error(fmt::format("split_mask: lowfreq_share must lie in (0, 1], got {}", lowfreq_share));
  }
  validate_mask(P);
  if (P.mask.count() == 0) { throw Error("split_mask: P has no sampled points"); }
  auto const T = P.frames();
  auto const H = P.height();
  auto const W = P.width();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t y = 0; y < H; ++y) {
      auto const row = frame_bits(P.mask, t).subspan(y * W, W);
      if (std::any_of(row.begin(), row.end(), [&](std::uint8_t v) { return v != row[0]; })) {
        throw Error(fmt::format("split_mask: frame {} row {} is partially sampled; row masks are required", t, y));
      }
    }
  }

  auto const centre = center_rows(P.center_lines, H);
  Rng rng(mix_seed(seed, kSplitStream));
  MaskTriplet out;
  out.P = P;
  out.P_theta = P;
  out.P_lambda = P;
  out.P_theta.mask = BinaryMask(P.mask.shape);
  out.P_lambda.mask = BinaryMask(P.mask.shape);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<std::size_t> others;
    for (auto y : P.sampled_rows(t)) {
      if (!std::binary_search(centre.begin(), centre.end(), y)) { others.push_back(y); }
    }
    if (others.empty()) {
      throw Error(fmt::format("split_mask: frame {} has no non-centre sampled rows to split", t));
    }
    for (auto y : centre) {
      set_row(out.P_theta.mask, t, y, 1);
      set_row(out.P_lambda.mask, t, y, 1);
    }
    auto shuffled = others;
    rng.shuffle(shuffled);
    auto const half = others.size() / 2;
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
      set_row(i < half ? out.P_theta.mask : out.P_lambda.mask, t, shuffled[i], 1);
    }
    auto by_frequency = others;
    std::stable_sort(by_frequency.begin(), by_frequency.end(), [H](std::size_t a, std::size_t b) {
      auto const fa = row_frequency(a, H);
      auto const fb = row_frequency(b, H);
      if (std::abs(fa) != std::abs(fb)) { return std::abs(fa) < std::abs(fb); }
      return fa < fb;
    });
    auto const n_low = static_cast<std::size_t>(std::floor(lowfreq_share * static_cast<double>(others.size()) + 1e-9));
    for (std::size_t i = 0; i < n_low; ++i) { set_row(out.P_lambda.mask, t, by_frequency[i], 1); }
  }
  out.P_theta.acceleration = out.P_theta.achieved_acceleration();
  out.P_lambda.acceleration = out.P_lambda.achieved_acceleration();
  return out;
}

void validate_mask(SamplingMask const &m)
{
  require_rank3("sampling mask", m.mask.shape);
  if (m.mask.bits.size() != numel_of(m.mask.shape)) { throw Error("sampling mask: size does not match shape"); }
  for (auto v : m.mask.bits) {
    if (v > 1) { throw Error("sampling mask: entries must be 0 or 1"); }
  }
  auto const centre = center_rows(m.center_lines, m.height());
  for (std::size_t t = 0; t < m.frames(); ++t) {
    if (!rows_contain(m.mask, t, centre)) {
      throw Error(fmt::format("sampling mask: frame {} is missing part of its {} centre lines", t, m.center_lines));
    }
  }
}

void validate_triplet(MaskTriplet const &tr)
{
  validate_mask(tr.P);
  validate_mask(tr.P_theta);
  validate_mask(tr.P_lambda);
  auto const &shape = tr.P.mask.shape;
  if (tr.P_theta.mask.shape != shape || tr.P_lambda.mask.shape != shape) {
    throw Error("mask triplet: shapes differ");
  }
  auto const centre = center_rows(tr.P.center_lines, tr.P.height());
  for (std::size_t t = 0; t < tr.P.frames(); ++t) {
    auto const p = frame_bits(tr.P.mask, t);
    auto const a = frame_bits(tr.P_theta.mask, t);
    auto const b = frame_bits(tr.P_lambda.mask, t);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (a[i] > p[i] || b[i] > p[i]) { throw Error(fmt::format("mask triplet: frame {} subset not contained in P", t)); }
      if ((a[i] | b[i]) != p[i]) { throw Error(fmt::format("mask triplet: frame {} union differs from P", t)); }
    }
    if (std::equal(a.begin(), a.end(), b.begin())) {
      throw Error(fmt::format("mask triplet: frame {} has identical P_theta and P_lambda", t));
    }
    if (!rows_contain(tr.P_theta.mask, t, centre) || !rows_contain(tr.P_lambda.mask, t, centre)) {
      throw Error(fmt::format("mask triplet: frame {} subset misses centre lines", t));
    }
  }
}

auto forward_model(Tensor const &x, SamplingMask const &P, double noise_std, std::uint64_t seed) -> Tensor
{
  if (x.shape() != P.mask.shape) {
    throw ShapeError(fmt::format("forward_model: image {} vs mask {}", shape_string(x.shape()),
                                 shape_string(P.mask.shape)));
  }
  if (!(noise_std >= 0.0)) { throw NumericError("forward_model: noise_std must be non-negative"); }
  auto k = fft2(x);
  if (noise_std > 0.0) {
    Rng rng(mix_seed(seed, kNoiseStream));
    std::vector<cx> noise(k.numel());
    for (auto &e : noise) {
      double const re = rng.normal();
      double const im = rng.normal();
      e = {noise_std * re, noise_std * im};
    }
    k = add(k, Tensor(x.shape(), std::move(noise)));
  }
  return mask_mul(k, P.mask);
}

auto zero_filled(Tensor const &y, SamplingMask const &P) -> Tensor
{
  if (y.shape() != P.mask.shape) {
    throw ShapeError(fmt::format("zero_filled: k-space {} vs mask {}", shape_string(y.shape()),
                                 shape_string(P.mask.shape)));
  }
  return fft2(y, true);
}

auto data_consistency(Tensor const &x, Tensor const &y, SamplingMask const &P) -> Tensor
{
  if (x.shape() != P.mask.shape || y.shape() != P.mask.shape) {
    throw ShapeError(fmt::format("data_consistency: image {}, k-space {}, mask {}", shape_string(x.shape()),
                                 shape_string(y.shape()), shape_string(P.mask.shape)));
  }
  auto const kept = mask_mul(fft2(x), P.mask.complement());
  return fft2(add(kept, y), true);
}

void encode_mask(io::ByteWriter &w, BinaryMask const &m)
{
  require_rank3("encode_mask", m.shape);
  w.magic("MASK1");
  for (auto d : m.shape) { w.u32(static_cast<std::uint32_t>(d)); }
  w.bytes(m.bits);
}

auto decode_mask(io::ByteReader &r) -> BinaryMask
{
  r.expect_magic("MASK1");
  Shape shape;
  for (int i = 0; i < 3; ++i) {
    auto const offset = r.offset();
    auto const d = r.u32();
    if (d == 0) { throw FormatError(fmt::format("{}: zero mask dimension at offset {}", r.source(), offset)); }
    shape.push_back(d);
  }
  auto const offset = r.offset();
  auto const raw = r.bytes(numel_of(shape));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] > 1) {
      throw FormatError(fmt::format("{}: mask byte {} at offset {} is not 0 or 1", r.source(), raw[i], offset + i));
    }
  }
  return BinaryMask(std::move(shape), std::vector<std::uint8_t>(raw.begin(), raw.end()));
}

auto infer_center_lines(BinaryMask const &a, BinaryMask const &b) -> std::size_t
{
  auto const T = a.shape.at(0);
  auto const H = a.shape.at(1);
  for (std::size_t c = H; c > 0; --c) {
    auto const rows = center_rows(c, H);
    bool ok = true;
    for (std::size_t t = 0; t < T && ok; ++t) { ok = rows_contain(a, t, rows) && rows_contain(b, t, rows); }
    if (ok) { return c; }
  }
  return 0;
}

void save_mask(std::filesystem::path const &path, SamplingMask const &m)
{
  io::ByteWriter w;
  encode_mask(w, m.mask);
  io::write_file(path, w.buffer());
}

auto load_mask(std::filesystem::path const &path) -> SamplingMask
{
  auto const bytes = io::read_file(path);
  io::ByteReader r(bytes, path.string());
  SamplingMask m;
  m.mask = decode_mask(r);
  if (!r.at_end()) { throw FormatError(fmt::format("{}: trailing bytes at offset {}", path.string(), r.offset())); }
  m.acceleration = m.achieved_acceleration();
  m.center_lines = infer_center_lines(m.mask, m.mask);
  return m;
}

} // namespace scl
