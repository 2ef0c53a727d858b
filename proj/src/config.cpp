#include "selfcolearn/config.hpp"

#include "selfcolearn/binio.hpp"
#include "selfcolearn/error.hpp"
#include "selfcolearn/metrics.hpp"
#include "selfcolearn/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <sstream>

namespace scl {

namespace {

enum class Kind
{
  u64,
  f64,
  boolean,
  choice,
  text,
  u64_or_auto,
};

struct KeySpec
{
  std::string key;
  Kind kind;
  std::string fallback;
  std::vector<std::string> choices = {};
  double min = -INFINITY;
};

auto schema() -> std::vector<KeySpec> const &
{
  static std::vector<KeySpec> const specs = [] {
    auto const f = [](double v) { return format_number(v); };
    return std::vector<KeySpec>{
      {"seed", Kind::u64, "0"},
      {"threads", Kind::u64, "1", {}, 1},
      {"phantom.frames", Kind::u64, "8", {}, 2},
      {"phantom.height", Kind::u64, "32", {}, 1},
      {"phantom.width", Kind::u64, "32", {}, 1},
      {"phantom.n_sequences", Kind::u64, "240", {}, 1},
      {"phantom.motion_amplitude", Kind::f64, "2.5", {}, 0},
      {"phantom.motion_cycles", Kind::f64, "1"},
      {"phantom.background_features", Kind::u64, "4"},
      {"augment.crop_frames", Kind::u64, "0"},
      {"augment.crop_height", Kind::u64, "0"},
      {"augment.crop_width", Kind::u64, "0"},
      {"augment.stride_x", Kind::u64, "1", {}, 1},
      {"augment.stride_y", Kind::u64, "1", {}, 1},
      {"augment.stride_t", Kind::u64, "1", {}, 1},
      {"split.train", Kind::f64, f(10.0 / 12.0), {}, 0},
      {"split.val", Kind::f64, f(1.0 / 12.0), {}, 0},
      {"split.test", Kind::f64, f(1.0 / 12.0), {}, 0},
      {"acq.acceleration", Kind::f64, "8", {}, 1},
      {"acq.center_lines", Kind::u64, "2"},
      {"acq.noise_std", Kind::f64, "0", {}, 0},
      {"acq.lowfreq_share", Kind::f64, "0.5", {}, 0},
      {"model.backbone", Kind::choice, "crnn_lite", {"crnn_lite", "ista_unrolled"}},
      {"model.iterations", Kind::u64, "3", {}, 1},
      {"model.filters", Kind::u64, "16", {}, 1},
      {"model.kernel", Kind::u64, "3", {}, 1},
      {"model.sparse_channels", Kind::u64, "8", {}, 1},
      {"model.init_lambda", Kind::f64, "0.01", {}, 0},
      {"model.init_eta", Kind::f64, "1", {}, 0},
      {"train.strategy", Kind::choice, "selfcolearn",
       {"selfcolearn", "b1_single_cross", "b2_single_omega", "supervised"}},
      {"train.loss_domain", Kind::choice, "kspace_kspace", {"kspace_kspace", "xt_kspace", "xt_xt"}},
      {"train.gamma", Kind::f64, "0.01", {}, 0},
      {"train.lr", Kind::f64, "0.0001", {}, 0},
      {"train.beta1", Kind::f64, "0.5", {}, 0},
      {"train.beta2", Kind::f64, "0.999", {}, 0},
      {"train.epsilon", Kind::f64, "1e-08", {}, 0},
      {"train.epochs", Kind::u64, "60", {}, 1},
      {"train.batch_size", Kind::u64, "1", {}, 1},
      {"train.checkpoint_every", Kind::u64, "0"},
      {"train.log_wall_time", Kind::boolean, "false"},
      {"eval.split", Kind::choice, "test", {"train", "val", "test"}},
      {"eval.images", Kind::boolean, "true"},
      {"eval.yt_column", Kind::u64_or_auto, "auto"},
      {"eval.error_range", Kind::f64, "0.2", {}, 0},
      {"paths.data", Kind::text, ""},
    };
  }();
  return specs;
}

auto find_spec(std::string const &key) -> KeySpec const &
{
  for (auto const &s : schema()) {
    if (s.key == key) { return s; }
  }
  throw ConfigError(fmt::format("unknown configuration key '{}'", key));
}

auto trim(std::string_view s) -> std::string
{
  auto const b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) { return {}; }
  auto const e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

auto parse_u64(std::string const &key, std::string const &v) -> std::uint64_t
{
  std::uint64_t out = 0;
  auto const [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError(fmt::format("key '{}': expected a non-negative integer, got '{}'", key, v));
  }
  return out;
}

auto parse_f64(std::string const &key, std::string const &v) -> double
{
  double out = 0.0;
  auto const [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(fmt::format("key '{}': expected a finite number, got '{}'", key, v));
  }
  return out;
}

auto canonical(KeySpec const &spec, std::string const &raw) -> std::string
{
  auto const v = trim(raw);
  switch (spec.kind) {
  case Kind::u64: {
    auto const n = parse_u64(spec.key, v);
    if (static_cast<double>(n) < spec.min) {
      throw ConfigError(fmt::format("key '{}': value {} below minimum {}", spec.key, n, spec.min));
    }
    return std::to_string(n);
  }
  case Kind::u64_or_auto:
    if (v == "auto") { return v; }
    return std::to_string(parse_u64(spec.key, v));
  case Kind::f64: {
    auto const x = parse_f64(spec.key, v);
    if (x < spec.min) { throw ConfigError(fmt::format("key '{}': value {} below minimum {}", spec.key, x, spec.min)); }
    return format_number(x);
  }
  case Kind::boolean:
    if (v == "true" || v == "1") { return "true"; }
    if (v == "false" || v == "0") { return "false"; }
    throw ConfigError(fmt::format("key '{}': expected true or false, got '{}'", spec.key, v));
  case Kind::choice:
    if (std::find(spec.choices.begin(), spec.choices.end(), v) == spec.choices.end()) {
      throw ConfigError(fmt::format("key '{}': '{}' is not one of {}", spec.key, v, fmt::join(spec.choices, ", ")));
    }
    return v;
  case Kind::text: return v;
  }
  throw ConfigError("unreachable");
}

} // namespace

RunConfig::RunConfig()
{
  for (auto const &s : schema()) { values_[s.key] = canonical(s, s.fallback); }
}

auto RunConfig::parse(std::string const &text, std::string const &source) -> RunConfig
{
  RunConfig c;
  c.merge_text(text, source);
  return c;
}

auto RunConfig::load(std::filesystem::path const &path) -> RunConfig
{
  auto const bytes = io::read_file(path);
  return parse(std::string(bytes.begin(), bytes.end()), path.string());
}

void RunConfig::merge_text(std::string const &text, std::string const &source)
{
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto const hash = line.find('#');
    auto const body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) { continue; }
    try {
      set_assignment(body);
    } catch (ConfigError const &e) {
      throw ConfigError(fmt::format("{}:{}: {}", source, number, e.what()));
    }
  }
}

void RunConfig::set(std::string const &key, std::string const &value)
{
  values_[key] = canonical(find_spec(key), value);
}

void RunConfig::set_assignment(std::string const &assignment)
{
  auto const eq = assignment.find('=');
  if (eq == std::string::npos) { throw ConfigError(fmt::format("expected key=value, got '{}'", assignment)); }
  set(trim(std::string_view(assignment).substr(0, eq)), trim(std::string_view(assignment).substr(eq + 1)));
}

auto RunConfig::get(std::string const &key) const -> std::string const &
{
  auto it = values_.find(key);
  if (it == values_.end()) { throw ConfigError(fmt::format("unknown configuration key '{}'", key)); }
  return it->second;
}

auto RunConfig::has_key(std::string const &key) const -> bool { return values_.contains(key); }

auto RunConfig::get_u64(std::string const &key) const -> std::uint64_t { return parse_u64(key, get(key)); }
auto RunConfig::get_f64(std::string const &key) const -> double { return parse_f64(key, get(key)); }
auto RunConfig::get_bool(std::string const &key) const -> bool { return get(key) == "true"; }

auto RunConfig::echo() const -> std::string
{
  std::string out = "# resolved configuration\n";
  for (auto const &s : schema()) { out += fmt::format("{} = {}\n", s.key, get(s.key)); }
  return out;
}

void RunConfig::save(std::filesystem::path const &path) const { write_text(path, echo()); }

auto RunConfig::keys() -> std::vector<std::string>
{
  std::vector<std::string> out;
  for (auto const &s : schema()) { out.push_back(s.key); }
  return out;
}

auto phantom_config(RunConfig const &c) -> PhantomConfig
{
  PhantomConfig p;
  p.frames = c.get_u64("phantom.frames");
  p.height = c.get_u64("phantom.height");
  p.width = c.get_u64("phantom.width");
  p.n_sequences = c.get_u64("phantom.n_sequences");
  p.seed = mix_seed(c.get_u64("seed"), 101);
  p.motion_amplitude = c.get_f64("phantom.motion_amplitude");
  p.motion_cycles = c.get_f64("phantom.motion_cycles");
  p.background_features = c.get_u64("phantom.background_features");
  return p;
}

auto augment_config(RunConfig const &c) -> AugmentConfig
{
  AugmentConfig a;
  a.crop_frames = c.get_u64("augment.crop_frames");
  a.crop_height = c.get_u64("augment.crop_height");
  a.crop_width = c.get_u64("augment.crop_width");
  a.stride_x = c.get_u64("augment.stride_x");
  a.stride_y = c.get_u64("augment.stride_y");
  a.stride_t = c.get_u64("augment.stride_t");
  return a;
}

auto split_fractions(RunConfig const &c) -> SplitFractions
{
  return {c.get_f64("split.train"), c.get_f64("split.val"), c.get_f64("split.test")};
}

auto acquisition_config(RunConfig const &c) -> AcquisitionConfig
{
  auto const p = phantom_config(c);
  auto const a = augment_config(c);
  AcquisitionConfig q;
  q.frames = a.crop_frames ? a.crop_frames : p.frames;
  q.height = a.crop_height ? a.crop_height : p.height;
  q.width = a.crop_width ? a.crop_width : p.width;
  q.acceleration = c.get_f64("acq.acceleration");
  q.center_lines = c.get_u64("acq.center_lines");
  q.noise_std = c.get_f64("acq.noise_std");
  q.seed = mix_seed(c.get_u64("seed"), 102);
  q.lowfreq_share = c.get_f64("acq.lowfreq_share");
  return q;
}

auto backbone_kind(RunConfig const &c) -> BackboneKind { return parse_backbone_kind(c.get("model.backbone")); }

auto backbone_hyper(RunConfig const &c) -> BackboneHyper
{
  BackboneHyper h;
  h.iterations = c.get_u64("model.iterations");
  h.filters = c.get_u64("model.filters");
  h.kernel = c.get_u64("model.kernel");
  h.sparse_channels = c.get_u64("model.sparse_channels");
  h.init_lambda = c.get_f64("model.init_lambda");
  h.init_eta = c.get_f64("model.init_eta");
  validate_hyper(h);
  return h;
}

auto train_config(RunConfig const &c) -> TrainConfig
{
  TrainConfig t;
  t.strategy = parse_strategy(c.get("train.strategy"));
  t.loss_domain = parse_loss_domain(c.get("train.loss_domain"));
  t.gamma = c.get_f64("train.gamma");
  t.adam.lr = c.get_f64("train.lr");
  t.adam.beta1 = c.get_f64("train.beta1");
  t.adam.beta2 = c.get_f64("train.beta2");
  t.adam.epsilon = c.get_f64("train.epsilon");
  t.epochs = c.get_u64("train.epochs");
  t.batch_size = c.get_u64("train.batch_size");
  t.seed = mix_seed(c.get_u64("seed"), 103);
  t.log_wall_time = c.get_bool("train.log_wall_time");
  validate_train_config(t);
  return t;
}

} // namespace scl
