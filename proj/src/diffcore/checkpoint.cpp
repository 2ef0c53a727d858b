#include "selfcolearn/checkpoint.hpp"

#include "selfcolearn/binio.hpp"
#include "selfcolearn/error.hpp"

#include <fmt/format.h>

namespace scl {

auto encode_tensors(ParamSet const &tensors) -> std::vector<std::uint8_t>
{
  io::ByteWriter w;
  w.magic("SCLW1");
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (auto const &[name, t] : tensors) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes({reinterpret_cast<std::uint8_t const *>(name.data()), name.size()});
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) { w.u32(static_cast<std::uint32_t>(d)); }
    w.complex_values(t.data());
  }
  return w.buffer();
}

auto decode_tensors(std::span<std::uint8_t const> bytes, std::string const &source) -> ParamSet
{
  io::ByteReader r(bytes, source);
  r.expect_magic("SCLW1");
  auto const count = r.u32();
  ParamSet out;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto const len = r.u32();
    auto const name_bytes = r.bytes(len);
    std::string name(name_bytes.begin(), name_bytes.end());
    auto const rank = r.u32();
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) {
      auto const offset = r.offset();
      auto const dim = r.u32();
      if (dim == 0) { throw FormatError(fmt::format("{}: zero dimension at offset {}", source, offset)); }
      shape.push_back(dim);
    }
    auto values = r.complex_values(numel_of(shape));
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  if (!r.at_end()) { throw FormatError(fmt::format("{}: trailing bytes at offset {}", source, r.offset())); }
  return out;
}

void save_tensors(std::filesystem::path const &path, ParamSet const &tensors)
{
  io::write_file(path, encode_tensors(tensors));
}

auto load_tensors(std::filesystem::path const &path) -> ParamSet
{
  auto const bytes = io::read_file(path);
  return decode_tensors(bytes, path.string());
}

} // namespace scl
