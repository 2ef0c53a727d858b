#include "selfcolearn/commands.hpp"
#include "selfcolearn/config.hpp"
#include "selfcolearn/error.hpp"
#include "selfcolearn/gradcheck.hpp"
#include "selfcolearn/kspace.hpp"
#include "selfcolearn/metrics.hpp"
#include "selfcolearn/phantom.hpp"

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <sstream>

namespace py = pybind11;
using namespace scl;

namespace {

using CxArray = py::array_t<cx, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

auto shape_of(py::buffer_info const &info) -> Shape
{
  Shape s;
  for (auto d : info.shape) { s.push_back(static_cast<std::size_t>(d)); }
  return s;
}

auto to_tensor(CxArray const &a) -> Tensor
{
  auto const info = a.request();
  auto const *p = static_cast<cx const *>(info.ptr);
  return Tensor(shape_of(info), std::vector<cx>(p, p + info.size));
}

auto to_array(Tensor const &t) -> CxArray
{
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  CxArray out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

auto to_mask(MaskArray const &a, std::size_t center_lines) -> SamplingMask
{
  auto const info = a.request();
  if (info.ndim != 3) { throw ShapeError("mask must be a [T, H, W] array"); }
  auto const *p = static_cast<std::uint8_t const *>(info.ptr);
  SamplingMask m;
  m.mask = BinaryMask(shape_of(info), std::vector<std::uint8_t>(p, p + info.size));
  m.center_lines = center_lines;
  m.acceleration = m.achieved_acceleration();
  return m;
}

auto to_array(SamplingMask const &m) -> MaskArray
{
  std::vector<py::ssize_t> shape(m.mask.shape.begin(), m.mask.shape.end());
  MaskArray out(shape);
  std::copy(m.mask.bits.begin(), m.mask.bits.end(), out.mutable_data());
  return out;
}

auto build_config(std::string const &text) -> RunConfig { return RunConfig::parse(text, "<python>"); }

} // namespace

PYBIND11_MODULE(_selfcolearn, m)
{
  m.doc() = "Self-supervised dual-network dynamic MRI reconstruction";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  m.def(
    "fft2", [](CxArray const &x, bool inverse) { return to_array(fft2(to_tensor(x), inverse)); }, py::arg("x"),
    py::arg("inverse") = false, "Unitary 2-D FFT over the last two axes (unshifted order).");

  m.def(
    "gen_mask",
    [](std::size_t frames, std::size_t height, std::size_t width, double acceleration, std::size_t center_lines,
       std::uint64_t seed) {
      AcquisitionConfig acq;
      acq.frames = frames;
      acq.height = height;
      acq.width = width;
      acq.acceleration = acceleration;
      acq.center_lines = center_lines;
      acq.seed = seed;
      return to_array(gen_mask(acq));
    },
    py::arg("frames"), py::arg("height"), py::arg("width"), py::arg("acceleration"), py::arg("center_lines") = 2,
    py::arg("seed") = 0, "Variable-density Cartesian row mask as a uint8 [T, H, W] array.");

  m.def(
    "split_mask",
    [](MaskArray const &P, std::uint64_t seed, double lowfreq_share, std::size_t center_lines) {
      auto const t = split_mask(to_mask(P, center_lines), seed, lowfreq_share);
      return py::make_tuple(to_array(t.P_theta), to_array(t.P_lambda));
    },
    py::arg("P"), py::arg("seed"), py::arg("lowfreq_share") = 0.5, py::arg("center_lines") = 2,
    "Splits P into (P_theta, P_lambda).");

  m.def(
    "forward_model",
    [](CxArray const &x, MaskArray const &P, double noise_std, std::uint64_t seed) {
      return to_array(forward_model(to_tensor(x), to_mask(P, 0), noise_std, seed));
    },
    py::arg("x"), py::arg("P"), py::arg("noise_std") = 0.0, py::arg("seed") = 0);

  m.def(
    "zero_filled", [](CxArray const &y, MaskArray const &P) { return to_array(zero_filled(to_tensor(y), to_mask(P, 0))); },
    py::arg("y"), py::arg("P"));

  m.def(
    "data_consistency",
    [](CxArray const &x, CxArray const &y, MaskArray const &P) {
      return to_array(data_consistency(to_tensor(x), to_tensor(y), to_mask(P, 0)));
    },
    py::arg("x"), py::arg("y"), py::arg("P"));

  m.def(
    "evaluate_pair",
    [](CxArray const &rec, CxArray const &ref) {
      auto const r = evaluate_pair(to_tensor(rec), to_tensor(ref));
      py::dict d;
      d["mse"] = r.mse;
      d["psnr_db"] = r.psnr_db;
      d["ssim"] = r.ssim;
      return d;
    },
    py::arg("rec"), py::arg("ref"), "MSE, PSNR and SSIM of magnitude images.");

  m.def(
    "gen_phantom_sequence",
    [](std::size_t frames, std::size_t height, std::size_t width, std::uint64_t seed, std::size_t index) {
      PhantomConfig pc;
      pc.frames = frames;
      pc.height = height;
      pc.width = width;
      pc.seed = seed;
      pc.n_sequences = index + 1;
      return to_array(gen_phantom_sequence(pc, index));
    },
    py::arg("frames") = 8, py::arg("height") = 32, py::arg("width") = 32, py::arg("seed") = 0, py::arg("index") = 0);

  m.def(
    "gradcheck",
    [](std::size_t seeds) {
      py::list out;
      for (auto const &r : run_gradcheck(default_gradcheck_cases(), seeds)) {
        out.append(py::make_tuple(r.name, r.max_rel_error, r.passed));
      }
      return out;
    },
    py::arg("seeds") = 1, "Runs the gradient suite; returns (name, max_rel_error, passed) tuples.");

  m.def(
    "resolved_config", [](std::string const &text) { return build_config(text).echo(); }, py::arg("text") = "",
    "Parses key = value text and returns the full resolved configuration.");

  m.def(
    "run_command",
    [](std::string const &command, std::string const &config_text, std::string const &out,
       std::string const &checkpoint) {
      auto const cfg = build_config(config_text);
      std::ostringstream log;
      py::gil_scoped_release release;
      if (command == "gen-data") {
        cmd_gen_data(cfg, out, log);
      } else if (command == "gen-masks") {
        cmd_gen_masks(cfg, out, log);
      } else if (command == "train") {
        cmd_train(cfg, out, log);
      } else if (command == "eval") {
        cmd_eval(cfg, checkpoint, out, log);
      } else if (command == "reconstruct") {
        cmd_reconstruct(cfg, checkpoint, out, log);
      } else if (command == "ablate") {
        cmd_ablate(cfg, out, log);
      } else {
        throw ConfigError("unknown command '" + command + "'");
      }
      return log.str();
    },
    py::arg("command"), py::arg("config_text"), py::arg("out"), py::arg("checkpoint") = "",
    "Runs a CLI command in-process and returns its log.");
}
