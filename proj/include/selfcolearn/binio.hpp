#pragma once

#include "tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scl::io {

// Little-endian serialization helpers shared by the mask, dataset and
// checkpoint formats.
class ByteWriter
{
public:
  void magic(std::string_view tag);
  void u32(std::uint32_t v);
  void f64(double v);
  void bytes(std::span<std::uint8_t const> b);
  void complex_values(std::span<cx const> values);

  auto buffer() const -> std::vector<std::uint8_t> const & { return buf_; }

private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader
{
public:
  ByteReader(std::span<std::uint8_t const> data, std::string source);

  void expect_magic(std::string_view tag);
  auto u32() -> std::uint32_t;
  auto f64() -> double;
  auto bytes(std::size_t n) -> std::span<std::uint8_t const>;
  auto complex_values(std::size_t n) -> std::vector<cx>;

  auto offset() const -> std::size_t { return pos_; }
  auto at_end() const -> bool { return pos_ == data_.size(); }
  auto source() const -> std::string const & { return source_; }

private:
  void need(std::size_t n, char const *what);

  std::span<std::uint8_t const> data_;
  std::string source_;
  std::size_t pos_ = 0;
};

auto read_file(std::filesystem::path const &path) -> std::vector<std::uint8_t>;
void write_file(std::filesystem::path const &path, std::span<std::uint8_t const> bytes);

} // namespace scl::io
