#include "selfcolearn/commands.hpp"

#include "selfcolearn/ablation.hpp"
#include "selfcolearn/checkpoint.hpp"
#include "selfcolearn/cotrain.hpp"
#include "selfcolearn/error.hpp"
#include "selfcolearn/gradcheck.hpp"
#include "selfcolearn/metrics.hpp"
#include "selfcolearn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ostream.h>

namespace scl {

namespace {

void ensure_dir(std::filesystem::path const &dir)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) { throw Error(fmt::format("cannot create directory '{}': {}", dir.string(), ec.message())); }
}

auto magnitudes(std::span<cx const> values) -> std::vector<double>
{
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) { out[i] = std::abs(values[i]); }
  return out;
}

auto split_by_name(DatasetSplit const &d, std::string const &name) -> Dataset const &
{
  if (name == "train") { return d.train; }
  if (name == "val") { return d.val; }
  return d.test;
}

auto yt_column(RunConfig const &cfg, std::size_t width) -> std::size_t
{
  auto const &v = cfg.get("eval.yt_column");
  std::size_t const col = v == "auto" ? width / 2 : cfg.get_u64("eval.yt_column");
  if (col >= width) { throw ConfigError(fmt::format("eval.yt_column {} outside image width {}", col, width)); }
  return col;
}

void write_images(std::filesystem::path const &dir, Tensor const &rec, Tensor const &ref, double error_range,
                  std::size_t column)
{
  ensure_dir(dir);
  auto const T = ref.dim(0);
  auto const H = ref.dim(1);
  auto const W = ref.dim(2);
  auto const frame = H * W;
  auto const rec_mag = magnitudes(rec.data());
  auto const ref_mag = magnitudes(ref.data());
  auto const err = error_map(rec, ref, error_range);
  for (std::size_t t = 0; t < T; ++t) {
    auto const rec_px = to_gray(std::span(rec_mag).subspan(t * frame, frame), 1.0);
    auto const ref_px = to_gray(std::span(ref_mag).subspan(t * frame, frame), 1.0);
    write_pgm(dir / fmt::format("rec_t{:02}.pgm", t), W, H, rec_px);
    write_pgm(dir / fmt::format("ref_t{:02}.pgm", t), W, H, ref_px);
    write_pgm(dir / fmt::format("err_t{:02}.pgm", t), W, H, std::span(err).subspan(t * frame, frame));
  }
  auto const diff = sub(rec, ref);
  write_pgm(dir / "yt_rec.pgm", T, H, to_gray(yt_view(rec, column), 1.0));
  write_pgm(dir / "yt_ref.pgm", T, H, to_gray(yt_view(ref, column), 1.0));
  write_pgm(dir / "yt_err.pgm", T, H, to_gray(yt_view(diff, column), error_range));
}

} // namespace

auto to_gray(std::span<double const> values, double range) -> std::vector<std::uint8_t>
{
  if (!(range > 0.0)) { throw ConfigError("display range must be positive"); }
  std::vector<std::uint8_t> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(values[i] / range, 0.0, 1.0) * 255.0));
  }
  return out;
}

auto error_map(Tensor const &rec, Tensor const &ref, double range) -> std::vector<std::uint8_t>
{
  if (rec.shape() != ref.shape()) {
    throw ShapeError(fmt::format("error_map: shapes {} and {} differ", shape_string(rec.shape()),
                                 shape_string(ref.shape())));
  }
  std::vector<double> diff(rec.numel());
  for (std::size_t i = 0; i < diff.size(); ++i) { diff[i] = std::abs(rec.data()[i] - ref.data()[i]); }
  return to_gray(diff, range);
}

void write_pgm(std::filesystem::path const &path, std::size_t width, std::size_t height,
               std::span<std::uint8_t const> pixels)
{
  if (pixels.size() != width * height) {
    throw ShapeError(fmt::format("write_pgm: {} pixels for a {}x{} image", pixels.size(), width, height));
  }
  auto text = fmt::format("P5\n{} {}\n255\n", width, height);
  text.append(pixels.begin(), pixels.end());
  write_text(path, text);
}

auto yt_view(Tensor const &seq, std::size_t column) -> std::vector<double>
{
  if (seq.rank() != 3 || column >= seq.dim(2)) { throw ShapeError("yt_view: need [T, H, W] and a valid column"); }
  auto const T = seq.dim(0);
  auto const H = seq.dim(1);
  auto const W = seq.dim(2);
  std::vector<double> out(H * T);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t t = 0; t < T; ++t) { out[y * T + t] = std::abs(seq.data()[(t * H + y) * W + column]); }
  }
  return out;
}

auto load_or_build_dataset(RunConfig const &cfg) -> DatasetSplit
{
  auto const &dir = cfg.get("paths.data");
  if (dir.empty()) {
    return build_dataset(phantom_config(cfg), augment_config(cfg), acquisition_config(cfg), split_fractions(cfg));
  }
  std::filesystem::path const root(dir);
  return {load_dataset(root / "train.cine"), load_dataset(root / "val.cine"), load_dataset(root / "test.cine")};
}

void cmd_gen_data(RunConfig const &cfg, std::filesystem::path const &out, std::ostream &log)
{
  auto const data =
    build_dataset(phantom_config(cfg), augment_config(cfg), acquisition_config(cfg), split_fractions(cfg));
  write_dataset(out, data);
  cfg.save(out / "run.cfg");
  fmt::print(log, "train {} val {} test {}\n", data.train.size(), data.val.size(), data.test.size());
}

void cmd_gen_masks(RunConfig const &cfg, std::filesystem::path const &out, std::ostream &log)
{
  ensure_dir(out);
  auto const acq = acquisition_config(cfg);
  auto const P = gen_mask(acq);
  auto const triplet = split_mask(P, mix_seed(acq.seed, 2), acq.lowfreq_share);
  save_mask(out / "P.mask", triplet.P);
  save_mask(out / "P_theta.mask", triplet.P_theta);
  save_mask(out / "P_lambda.mask", triplet.P_lambda);
  cfg.save(out / "run.cfg");
  fmt::print(log, "acceleration requested {} achieved {:.4f} (P_theta {:.4f}, P_lambda {:.4f})\n", acq.acceleration,
             triplet.P.achieved_acceleration(), triplet.P_theta.achieved_acceleration(),
             triplet.P_lambda.achieved_acceleration());
}

void cmd_train(RunConfig const &cfg, std::filesystem::path const &out, std::ostream &log)
{
  ensure_dir(out);
  cfg.save(out / "run.cfg");
  auto const data = load_or_build_dataset(cfg);
  auto const tc = train_config(cfg);
  auto const every = cfg.get_u64("train.checkpoint_every");
  auto save_all = [&](std::filesystem::path const &dir, std::string const &suffix, TrainResult const &r) {
    save_model(dir / fmt::format("net1{}.sclw", suffix), r.model);
    if (r.model_lambda) { save_model(dir / fmt::format("net2{}.sclw", suffix), *r.model_lambda); }
  };
  auto const result = train(data.train, data.val, tc, backbone_kind(cfg), backbone_hyper(cfg),
                            [&](std::size_t epoch, TrainResult const &r) {
                              auto const &e = r.history.epochs.back();
                              fmt::print(log, "epoch {} l_uc {:.6g} l_cc {:.6g} l_co {:.6g} val_psnr {:.3f}\n", epoch,
                                         e.l_uc, e.l_cc, e.l_co, e.val_psnr);
                              if (every > 0 && epoch % every == 0) {
                                ensure_dir(out / "checkpoints");
                                save_all(out / "checkpoints", fmt::format("_e{:03}", epoch), r);
                              }
                            });
  save_all(out, "", result);
  write_history_csv(out / "history.csv", result.history);
}

void cmd_eval(RunConfig const &cfg, std::filesystem::path const &checkpoint, std::filesystem::path const &out,
              std::ostream &log)
{
  ensure_dir(out);
  cfg.save(out / "run.cfg");
  auto const model = load_model(checkpoint);
  auto const data = load_or_build_dataset(cfg);
  auto const &split = split_by_name(data, cfg.get("eval.split"));
  if (split.empty()) { throw Error(fmt::format("split '{}' is empty", cfg.get("eval.split"))); }
  bool const images = cfg.get_bool("eval.images");
  double const range = cfg.get_f64("eval.error_range");
  std::vector<MetricsRecord> records;
  for (auto const &s : split) {
    auto const rec = reconstruct(model, s.y_omega, s.masks.P);
    records.push_back(evaluate_pair(rec, s.reference, s.id));
    if (images) { write_images(out / "images" / s.id, rec, s.reference, range, yt_column(cfg, s.reference.dim(2))); }
  }
  write_metrics_csv(out / "metrics.csv", records);
  auto const summary = summarize(records);
  write_summary_csv(out / "summary.csv", summary);
  auto const zf = summarize(evaluate_zero_filled(split));
  fmt::print(log, "{} sequences: psnr {:.3f} +- {:.3f} dB, ssim {:.4f} (zero-filled psnr {:.3f} dB)\n", records.size(),
             summary.psnr_db.mean, summary.psnr_db.std, summary.ssim.mean, zf.psnr_db.mean);
}

void cmd_reconstruct(RunConfig const &cfg, std::filesystem::path const &checkpoint, std::filesystem::path const &out,
                     std::ostream &log)
{
  ensure_dir(out);
  cfg.save(out / "run.cfg");
  auto const model = load_model(checkpoint);
  auto const data = load_or_build_dataset(cfg);
  auto const &split = split_by_name(data, cfg.get("eval.split"));
  ParamSet recon;
  for (auto const &s : split) { recon.push_back({s.id, reconstruct(model, s.y_omega, s.masks.P)}); }
  save_tensors(out / "reconstructions.sclw", recon);
  fmt::print(log, "reconstructed {} sequences into {}\n", recon.size(), (out / "reconstructions.sclw").string());
}

void cmd_ablate(RunConfig const &cfg, std::filesystem::path const &out, std::ostream &log)
{
  ensure_dir(out);
  cfg.save(out / "run.cfg");
  auto const data = load_or_build_dataset(cfg);
  auto const report = run_ablation(data, train_config(cfg), backbone_kind(cfg), backbone_hyper(cfg),
                                   cfg.get_u64("threads"));
  write_text(out / "ablation.csv", ablation_csv(report));
  write_text(out / "ablation_metrics.csv", ablation_metrics_csv(report));
  fmt::print(log, "zero-filled psnr {:.3f} dB\n", report.zero_filled_summary.psnr_db.mean);
  for (auto const &r : report.rows) {
    fmt::print(log, "{:<12} psnr {:.3f} +- {:.3f} dB  ssim {:.4f}\n", r.name, r.summary.psnr_db.mean,
               r.summary.psnr_db.std, r.summary.ssim.mean);
  }
}

auto cmd_gradcheck(std::size_t seeds, std::filesystem::path const &out, std::ostream &log) -> bool
{
  auto const reports = run_gradcheck(default_gradcheck_cases(), seeds);
  auto const text = format_gradcheck_report(reports);
  log << text;
  if (!out.empty()) {
    ensure_dir(out);
    write_text(out / "gradcheck.txt", text);
  }
  return std::all_of(reports.begin(), reports.end(), [](auto const &r) { return r.passed; });
}

} // namespace scl
