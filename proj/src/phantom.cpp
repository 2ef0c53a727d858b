#include "selfcolearn/phantom.hpp"

#include "selfcolearn/binio.hpp"
#include "selfcolearn/error.hpp"
#include "selfcolearn/ops.hpp"
#include "selfcolearn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>
#include <numeric>

namespace scl {

namespace {

constexpr std::uint64_t kPartitionStream = 0x7061727469;
constexpr std::size_t kIdBytes = 16;

// Anti-aliased coverage of a pixel at signed distance `inside` (pixels)
// within a boundary.
auto coverage(double inside) -> double { return std::clamp(inside + 0.5, 0.0, 1.0); }

struct Ellipse
{
  double cx, cy, a, b, angle, intensity;

  auto cover(double x, double y) const -> double
  {
    double const dx = x - cx;
    double const dy = y - cy;
    double const u = (dx * std::cos(angle) + dy * std::sin(angle)) / a;
    double const v = (-dx * std::sin(angle) + dy * std::cos(angle)) / b;
    double const rho = std::sqrt(u * u + v * v);
    return coverage((1.0 - rho) * std::min(a, b));
  }
};

void paint(std::vector<double> &img, std::size_t H, std::size_t W, auto const &shape_cover, double intensity)
{
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      double const c = shape_cover(static_cast<double>(x), static_cast<double>(y));
      auto &v = img[y * W + x];
      v = v * (1.0 - c) + intensity * c;
    }
  }
}

auto max_magnitude(std::span<cx const> values) -> double
{
  double m = 0.0;
  for (auto const &v : values) { m = std::max(m, std::abs(v)); }
  return m;
}

} // namespace

void validate_phantom_config(PhantomConfig const &cfg)
{
  for (auto d : {cfg.frames, cfg.height, cfg.width}) {
    if (!detail::is_power_of_two(d)) {
      throw Error(fmt::format("phantom: dimensions must be powers of two, got {}x{}x{}", cfg.height, cfg.width,
                              cfg.frames));
    }
  }
  if (cfg.frames < 2) { throw Error("phantom: at least 2 frames are required"); }
  if (cfg.n_sequences < 1) { throw Error("phantom: at least one sequence is required"); }
  if (cfg.motion_amplitude < 0.0) { throw Error("phantom: motion amplitude must be non-negative"); }
}

auto inner_radius(PhantomConfig const &cfg, double base, std::size_t t) -> double
{
  double const phase = 2.0 * std::numbers::pi * cfg.motion_cycles * static_cast<double>(t)
                     / static_cast<double>(cfg.frames);
  return base + cfg.motion_amplitude * std::cos(phase);
}

auto gen_phantom_sequence(PhantomConfig const &cfg, std::size_t index) -> Tensor
{
  validate_phantom_config(cfg);
  auto const T = cfg.frames;
  auto const H = cfg.height;
  auto const W = cfg.width;
  double const fh = static_cast<double>(H);
  double const fw = static_cast<double>(W);
  double const side = std::min(fh, fw);
  Rng rng(mix_seed(cfg.seed, index));

  std::vector<double> background(H * W, 0.0);
  Ellipse const body{fw / 2 + rng.uniform(-0.04, 0.04) * fw, fh / 2 + rng.uniform(-0.04, 0.04) * fh,
                     rng.uniform(0.36, 0.46) * fw, rng.uniform(0.30, 0.40) * fh,
                     rng.uniform(-0.3, 0.3), rng.uniform(0.1, 0.9)};
  paint(background, H, W, [&](double x, double y) { return body.cover(x, y); }, body.intensity);
  for (std::size_t i = 0; i < cfg.background_features; ++i) {
    double const r = rng.uniform(0.0, 0.7);
    double const th = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Ellipse const e{body.cx + r * body.a * std::cos(th), body.cy + r * body.b * std::sin(th),
                    rng.uniform(0.04, 0.12) * side, rng.uniform(0.04, 0.12) * side,
                    rng.uniform(0.0, std::numbers::pi), rng.uniform(0.1, 0.9)};
    paint(background, H, W, [&](double x, double y) { return e.cover(x, y); }, e.intensity);
  }

  double const hx = fw / 2 + rng.uniform(-0.08, 0.08) * fw;
  double const hy = fh / 2 + rng.uniform(-0.08, 0.08) * fh;
  double const base = rng.uniform(0.15, 0.19) * side;
  double const thickness = rng.uniform(0.07, 0.10) * side;
  double const outer = base + cfg.motion_amplitude + thickness;
  double const myo = rng.uniform(0.25, 0.45);
  double const blood = rng.uniform(0.8, 1.0);

  std::array<double, 6> coef{};
  for (auto &c : coef) { c = rng.uniform(-1.0, 1.0); }
  double const phase_amp = rng.uniform(0.5, 1.0) * std::numbers::pi / 4.0;
  std::vector<double> phase(H * W);
  double peak = 0.0;
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      double const u = (static_cast<double>(x) - fw / 2) / (fw / 2);
      double const v = (static_cast<double>(y) - fh / 2) / (fh / 2);
      double const p = coef[0] + coef[1] * u + coef[2] * v + coef[3] * u * v + coef[4] * u * u + coef[5] * v * v;
      phase[y * W + x] = p;
      peak = std::max(peak, std::abs(p));
    }
  }
  for (auto &p : phase) { p *= peak > 0.0 ? phase_amp / peak : 0.0; }

  std::vector<cx> values(T * H * W);
  for (std::size_t t = 0; t < T; ++t) {
    auto frame = background;
    double const inner = inner_radius(cfg, base, t);
    auto disk = [&](double radius) {
      return [&, radius](double x, double y) { return coverage(radius - std::hypot(x - hx, y - hy)); };
    };
    paint(frame, H, W, disk(outer), myo);
    paint(frame, H, W, disk(inner), blood);
    for (std::size_t p = 0; p < H * W; ++p) { values[t * H * W + p] = std::polar(frame[p], phase[p]); }
  }
  double const m = max_magnitude(values);
  for (auto &v : values) { v /= m; }
  return Tensor({T, H, W}, std::move(values));
}

auto gen_phantom(PhantomConfig const &cfg) -> std::vector<Tensor>
{
  validate_phantom_config(cfg);
  std::vector<Tensor> out;
  out.reserve(cfg.n_sequences);
  for (std::size_t i = 0; i < cfg.n_sequences; ++i) { out.push_back(gen_phantom_sequence(cfg, i)); }
  return out;
}

auto augment_translate(Tensor const &seq, AugmentConfig const &aug) -> std::vector<Crop>
{
  if (seq.rank() != 3) { throw ShapeError("augment_translate: expected a [T,H,W] sequence"); }
  auto const T = seq.dim(0);
  auto const H = seq.dim(1);
  auto const W = seq.dim(2);
  auto const ct = aug.crop_frames ? aug.crop_frames : T;
  auto const ch = aug.crop_height ? aug.crop_height : H;
  auto const cw = aug.crop_width ? aug.crop_width : W;
  if (ct > T || ch > H || cw > W) {
    throw Error(fmt::format("augment_translate: crop {}x{}x{} larger than source {}x{}x{}", ch, cw, ct, H, W, T));
  }
  if (aug.stride_x == 0 || aug.stride_y == 0 || aug.stride_t == 0) {
    throw Error("augment_translate: strides must be positive");
  }
  auto const src = seq.data();
  std::vector<Crop> out;
  for (std::size_t t0 = 0; t0 + ct <= T; t0 += aug.stride_t) {
    for (std::size_t y0 = 0; y0 + ch <= H; y0 += aug.stride_y) {
      for (std::size_t x0 = 0; x0 + cw <= W; x0 += aug.stride_x) {
        std::vector<cx> values(ct * ch * cw);
        for (std::size_t t = 0; t < ct; ++t) {
          for (std::size_t y = 0; y < ch; ++y) {
            for (std::size_t x = 0; x < cw; ++x) {
              values[(t * ch + y) * cw + x] = src[((t0 + t) * H + y0 + y) * W + x0 + x];
            }
          }
        }
        double const m = max_magnitude(values);
        if (m > 0.0) {
          for (auto &v : values) { v /= m; }
        }
        out.push_back({Tensor({ct, ch, cw}, std::move(values)), t0, y0, x0});
      }
    }
  }
  return out;
}

auto partition_sizes(std::size_t n, SplitFractions const &split) -> std::array<std::size_t, 3>
{
  for (double f : {split.train, split.val, split.test}) {
    if (f < 0.0 || f > 1.0) { throw Error(fmt::format("split fraction {} outside [0, 1]", f)); }
  }
  if (std::abs(split.train + split.val + split.test - 1.0) > 1e-6) {
    throw Error(fmt::format("split fractions sum to {}, expected 1", split.train + split.val + split.test));
  }
  auto const count = [n](double f) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * f + 1e-9));
  };
  auto const val = count(split.val);
  auto const test = count(split.test);
  return {n - val - test, val, test};
}

auto simulate_sample(std::string id, Tensor reference, AcquisitionConfig const &acq, std::uint64_t stream)
  -> CineSample
{
  AcquisitionConfig local = acq;
  local.seed = mix_seed(acq.seed, stream);
  local.frames = reference.dim(0);
  local.height = reference.dim(1);
  local.width = reference.dim(2);
  auto P = gen_mask(local);
  CineSample s;
  s.id = std::move(id);
  s.y_omega = forward_model(reference, P, acq.noise_std, mix_seed(local.seed, 1)).detach();
  s.masks = split_mask(P, mix_seed(local.seed, 2), acq.lowfreq_share);
  s.reference = std::move(reference);
  return s;
}

auto build_dataset(PhantomConfig const &cfg, AugmentConfig const &aug, AcquisitionConfig const &acq,
                   SplitFractions const &split) -> DatasetSplit
{
  validate_phantom_config(cfg);
  auto const sizes = partition_sizes(cfg.n_sequences, split);
  std::vector<std::size_t> order(cfg.n_sequences);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(cfg.seed, kPartitionStream));
  rng.shuffle(order);

  DatasetSplit out;
  std::array<Dataset *, 3> const parts{&out.train, &out.val, &out.test};
  std::size_t cursor = 0;
  for (std::size_t p = 0; p < 3; ++p) {
    for (std::size_t i = 0; i < sizes[p]; ++i, ++cursor) {
      auto const source = order[cursor];
      auto const crops = augment_translate(gen_phantom_sequence(cfg, source), aug);
      for (std::size_t c = 0; c < crops.size(); ++c) {
        auto id = fmt::format("p{:05}c{:04}", source, c);
        auto sample = simulate_sample(std::move(id), crops[c].data, acq, source * 100003ULL + c);
        parts[p]->push_back(std::move(sample));
      }
    }
  }
  return out;
}

void validate_sample(CineSample const &s)
{
  try {
    if (s.reference.rank() != 3) { throw Error("reference must be [T,H,W]"); }
    if (s.y_omega.shape() != s.reference.shape()) { throw Error("y_omega shape differs from reference"); }
    if (s.masks.P.mask.shape != s.reference.shape()) { throw Error("mask shape differs from reference"); }
    for (auto const &v : s.reference.data()) {
      if (std::abs(v) > 1.0 + 1e-12) { throw Error("reference magnitude exceeds 1"); }
    }
    auto const y = s.y_omega.data();
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!s.masks.P.mask.bits[i] && y[i] != cx{}) {
        throw Error(fmt::format("y_omega is nonzero outside P at flat index {}", i));
      }
    }
    validate_triplet(s.masks);
  } catch (Error const &e) {
    throw Error(fmt::format("sample '{}': {}", s.id, e.what()));
  }
}

auto encode_dataset(Dataset const &samples) -> std::vector<std::uint8_t>
{
  io::ByteWriter w;
  w.magic("CINE1");
  Shape const shape = samples.empty() ? Shape{0, 0, 0} : samples.front().reference.shape();
  w.u32(static_cast<std::uint32_t>(samples.size()));
  for (auto d : shape) { w.u32(static_cast<std::uint32_t>(d)); }
  for (auto const &s : samples) {
    if (s.reference.shape() != shape) { throw Error(fmt::format("sample '{}': dimensions differ from the set", s.id)); }
    if (s.id.size() > kIdBytes) { throw Error(fmt::format("sample id '{}' longer than {} bytes", s.id, kIdBytes)); }
    std::array<std::uint8_t, kIdBytes> id{};
    std::copy(s.id.begin(), s.id.end(), id.begin());
    w.bytes(id);
    w.complex_values(s.reference.data());
    w.complex_values(s.y_omega.data());
    encode_mask(w, s.masks.P.mask);
    encode_mask(w, s.masks.P_theta.mask);
    encode_mask(w, s.masks.P_lambda.mask);
  }
  return w.buffer();
}

auto decode_dataset(std::span<std::uint8_t const> bytes, std::string const &source) -> Dataset
{
  io::ByteReader r(bytes, source);
  r.expect_magic("CINE1");
  auto const S = r.u32();
  Shape shape{r.u32(), r.u32(), r.u32()};
  Dataset out;
  if (S == 0) {
    if (!r.at_end()) { throw FormatError(fmt::format("{}: trailing bytes at offset {}", source, r.offset())); }
    return out;
  }
  if (numel_of(shape) == 0) { throw FormatError(fmt::format("{}: zero dimension in header", source)); }
  auto const n = numel_of(shape);
  for (std::uint32_t i = 0; i < S; ++i) {
    auto const raw_id = r.bytes(kIdBytes);
    std::string id(raw_id.begin(), std::find(raw_id.begin(), raw_id.end(), std::uint8_t{0}));
    CineSample s;
    s.id = std::move(id);
    s.reference = Tensor(shape, r.complex_values(n));
    s.y_omega = Tensor(shape, r.complex_values(n));
    std::array<BinaryMask, 3> masks;
    for (auto &m : masks) {
      auto const offset = r.offset();
      m = decode_mask(r);
      if (m.shape != shape) {
        throw FormatError(fmt::format("{}: mask at offset {} has shape {}, expected {}", source, offset,
                                      shape_string(m.shape), shape_string(shape)));
      }
    }
    auto const centre = infer_center_lines(masks[1], masks[2]);
    s.masks.P = {masks[0], 0.0, centre};
    s.masks.P_theta = {masks[1], 0.0, centre};
    s.masks.P_lambda = {masks[2], 0.0, centre};
    for (auto *m : {&s.masks.P, &s.masks.P_theta, &s.masks.P_lambda}) { m->acceleration = m->achieved_acceleration(); }
    validate_sample(s);
    out.push_back(std::move(s));
  }
  if (!r.at_end()) { throw FormatError(fmt::format("{}: trailing bytes at offset {}", source, r.offset())); }
  return out;
}

void save_dataset(std::filesystem::path const &path, Dataset const &samples)
{
  io::write_file(path, encode_dataset(samples));
}

auto load_dataset(std::filesystem::path const &path) -> Dataset
{
  auto const bytes = io::read_file(path);
  return decode_dataset(bytes, path.string());
}

void write_dataset(std::filesystem::path const &dir, DatasetSplit const &data)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) { throw Error(fmt::format("cannot create directory '{}': {}", dir.string(), ec.message())); }
  save_dataset(dir / "train.cine", data.train);
  save_dataset(dir / "val.cine", data.val);
  save_dataset(dir / "test.cine", data.test);
}

} // namespace scl
