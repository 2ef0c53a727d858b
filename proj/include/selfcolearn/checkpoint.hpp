#pragma once

#include "tensor.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace scl {

// SCLW1 parameter file:
//   "SCLW1", u32 count, then per tensor: u32 name length, name bytes,
//   u32 rank, u32 dims[rank], interleaved f64 (re, im) data.
// All integers and floats little-endian.
auto encode_tensors(ParamSet const &tensors) -> std::vector<std::uint8_t>;
auto decode_tensors(std::span<std::uint8_t const> bytes, std::string const &source) -> ParamSet;

void save_tensors(std::filesystem::path const &path, ParamSet const &tensors);
auto load_tensors(std::filesystem::path const &path) -> ParamSet;

} // namespace scl
