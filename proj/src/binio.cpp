#include "selfcolearn/binio.hpp"

#include "selfcolearn/error.hpp"

#include <bit>
#include <fmt/format.h>
#include <fstream>
#include <iterator>

namespace scl::io {

void ByteWriter::magic(std::string_view tag) { buf_.insert(buf_.end(), tag.begin(), tag.end()); }

void ByteWriter::u32(std::uint32_t v)
{
  for (int i = 0; i < 4; ++i) { buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i))); }
}

void ByteWriter::f64(double v)
{
  auto const bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) { buf_.push_back(static_cast<std::uint8_t>(bits >> (8 * i))); }
}

void ByteWriter::bytes(std::span<std::uint8_t const> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

void ByteWriter::complex_values(std::span<cx const> values)
{
  buf_.reserve(buf_.size() + values.size() * 16);
  for (auto const &v : values) {
    f64(v.real());
    f64(v.imag());
  }
}

ByteReader::ByteReader(std::span<std::uint8_t const> data, std::string source)
  : data_{data}
  , source_{std::move(source)}
{
}

void ByteReader::need(std::size_t n, char const *what)
{
  if (data_.size() - pos_ < n) {
    throw FormatError(fmt::format("{}: truncated {} at offset {} (need {} bytes, {} left)", source_, what, pos_, n,
                                  data_.size() - pos_));
  }
}

void ByteReader::expect_magic(std::string_view tag)
{
  need(tag.size(), "magic");
  std::string_view const got(reinterpret_cast<char const *>(data_.data() + pos_), tag.size());
  if (got != tag) { throw FormatError(fmt::format("{}: bad magic at offset {} (expected '{}')", source_, pos_, tag)); }
  pos_ += tag.size();
}

auto ByteReader::u32() -> std::uint32_t
{
  need(4, "u32");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) { v |= std::uint32_t(data_[pos_ + i]) << (8 * i); }
  pos_ += 4;
  return v;
}

auto ByteReader::f64() -> double
{
  need(8, "f64");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) { v |= std::uint64_t(data_[pos_ + i]) << (8 * i); }
  pos_ += 8;
  return std::bit_cast<double>(v);
}

auto ByteReader::bytes(std::size_t n) -> std::span<std::uint8_t const>
{
  need(n, "byte block");
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

auto ByteReader::complex_values(std::size_t n) -> std::vector<cx>
{
  need(n * 16, "complex block");
  std::vector<cx> out(n);
  for (auto &v : out) {
    double const re = f64();
    double const im = f64();
    v = {re, im};
  }
  return out;
}

auto read_file(std::filesystem::path const &path) -> std::vector<std::uint8_t>
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw Error(fmt::format("cannot open '{}' for reading", path.string())); }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(std::filesystem::path const &path, std::span<std::uint8_t const> bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) { throw Error(fmt::format("cannot open '{}' for writing", path.string())); }
  out.write(reinterpret_cast<char const *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) { throw Error(fmt::format("write failed for '{}'", path.string())); }
}

} // namespace scl::io
