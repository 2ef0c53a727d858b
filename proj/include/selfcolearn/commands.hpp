#pragma once

#include "config.hpp"
#include "phantom.hpp"

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <vector>

namespace scl {

// 8-bit grayscale helpers. Pixel values are round(clamp(v / range, 0, 1) * 255).
auto to_gray(std::span<double const> values, double range) -> std::vector<std::uint8_t>;
/// |rec - ref| per pixel, scaled by `range`.
auto error_map(Tensor const &rec, Tensor const &ref, double range) -> std::vector<std::uint8_t>;
/// Binary PGM (P5) with maxval 255.
void write_pgm(std::filesystem::path const &path, std::size_t width, std::size_t height,
               std::span<std::uint8_t const> pixels);
/// [H, T] magnitude image of column `column` of a [T, H, W] sequence: row y,
/// column t.
auto yt_view(Tensor const &seq, std::size_t column) -> std::vector<double>;

/// Loads train/val/test from paths.data when set, otherwise builds the
/// dataset in memory from the configuration.
auto load_or_build_dataset(RunConfig const &cfg) -> DatasetSplit;

// Each command writes its artifacts and the resolved run.cfg into `out`
// (created if needed) and logs a short summary to `log`.
void cmd_gen_data(RunConfig const &cfg, std::filesystem::path const &out, std::ostream &log);
void cmd_gen_masks(RunConfig const &cfg, std::filesystem::path const &out, std::ostream &log);
void cmd_train(RunConfig const &cfg, std::filesystem::path const &out, std::ostream &log);
void cmd_eval(RunConfig const &cfg, std::filesystem::path const &checkpoint, std::filesystem::path const &out,
              std::ostream &log);
void cmd_reconstruct(RunConfig const &cfg, std::filesystem::path const &checkpoint, std::filesystem::path const &out,
                     std::ostream &log);
void cmd_ablate(RunConfig const &cfg, std::filesystem::path const &out, std::ostream &log);
/// Returns true when every case passes. Writes gradcheck.txt when `out` is
/// not empty.
auto cmd_gradcheck(std::size_t seeds, std::filesystem::path const &out, std::ostream &log) -> bool;

} // namespace scl
