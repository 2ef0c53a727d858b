#pragma once

#include "cotrain.hpp"
#include "kspace.hpp"
#include "models.hpp"
#include "phantom.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace scl {

/// Flat key=value run configuration. Every key belongs to a fixed schema;
/// values are type-checked on assignment and stored in canonical text form so
/// that the echoed file reproduces the run exactly.
class RunConfig
{
public:
  RunConfig(); // schema defaults

  /// Parses "key = value" lines; '#' starts a comment. Unknown keys and
  /// malformed values throw ConfigError naming the line.
  static auto parse(std::string const &text, std::string const &source = "<string>") -> RunConfig;
  static auto load(std::filesystem::path const &path) -> RunConfig;
  void merge_text(std::string const &text, std::string const &source);

  void set(std::string const &key, std::string const &value);
  /// Parses "key=value".
  void set_assignment(std::string const &assignment);
  auto get(std::string const &key) const -> std::string const &;
  auto has_key(std::string const &key) const -> bool;

  auto get_u64(std::string const &key) const -> std::uint64_t;
  auto get_f64(std::string const &key) const -> double;
  auto get_bool(std::string const &key) const -> bool;

  /// Every key in schema order, one "key = value" line each.
  auto echo() const -> std::string;
  void save(std::filesystem::path const &path) const;

  static auto keys() -> std::vector<std::string>;

  auto operator==(RunConfig const &) const -> bool = default;

private:
  std::map<std::string, std::string> values_;
};

// Typed views. Sub-seeds are derived from the master "seed" key.
auto phantom_config(RunConfig const &c) -> PhantomConfig;
auto augment_config(RunConfig const &c) -> AugmentConfig;
auto split_fractions(RunConfig const &c) -> SplitFractions;
/// Acquisition dimensions follow the crop size (or the phantom size).
auto acquisition_config(RunConfig const &c) -> AcquisitionConfig;
auto backbone_kind(RunConfig const &c) -> BackboneKind;
auto backbone_hyper(RunConfig const &c) -> BackboneHyper;
auto train_config(RunConfig const &c) -> TrainConfig;

} // namespace scl
