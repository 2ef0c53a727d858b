#include "helpers.hpp"

#include "selfcolearn/error.hpp"
#include "selfcolearn/kspace.hpp"

#include <algorithm>
#include <doctest.h>
#include <filesystem>
#include <set>

using namespace scl;
using namespace testing;

namespace {

auto row_mask(std::size_t T, std::size_t H, std::size_t W, std::vector<std::vector<std::size_t>> const &rows,
              std::size_t center) -> SamplingMask
{
  SamplingMask m;
  m.mask = BinaryMask({T, H, W});
  m.center_lines = center;
  m.acceleration = 2.0;
  for (std::size_t t = 0; t < T; ++t) {
    for (auto y : rows[t % rows.size()]) {
      for (std::size_t x = 0; x < W; ++x) { m.mask.bits[(t * H + y) * W + x] = 1; }
    }
  }
  return m;
}

auto acq(std::size_t T, std::size_t H, std::size_t W, double accel, std::size_t center, std::uint64_t seed)
  -> AcquisitionConfig
{
  AcquisitionConfig c;
  c.frames = T;
  c.height = H;
  c.width = W;
  c.acceleration = accel;
  c.center_lines = center;
  c.seed = seed;
  return c;
}

auto values_of(Tensor const &t) -> std::vector<cx> { return {t.data().begin(), t.data().end()}; }

auto random_half_mask(std::size_t T, std::size_t H, std::size_t W, std::uint64_t seed) -> SamplingMask
{
  scl::Rng rng(seed);
  SamplingMask m;
  m.mask = BinaryMask({T, H, W});
  for (auto &b : m.mask.bits) { b = rng.uniform() < 0.5 ? 1 : 0; }
  return m;
}

} // namespace

TEST_CASE("row frequencies and centre rows in unshifted order")
{
  CHECK(row_frequency(0, 8) == 0);
  CHECK(row_frequency(3, 8) == 3);
  CHECK(row_frequency(4, 8) == -4);
  CHECK(row_frequency(7, 8) == -1);
  CHECK(center_rows(2, 8) == std::vector<std::size_t>{0, 7});
  CHECK(center_rows(4, 8) == std::vector<std::size_t>{0, 1, 6, 7});
  CHECK(center_rows(0, 8).empty());
  CHECK_THROWS_AS(center_rows(9, 8), Error);
}

TEST_CASE("gen_mask: 2-fold on 8x8x1 with 2 centre lines samples 4 rows")
{
  auto const m = gen_mask(acq(1, 8, 8, 2.0, 2, 7));
  auto const rows = m.sampled_rows(0);
  CHECK(rows.size() == 4);
  CHECK(std::count(rows.begin(), rows.end(), 0) == 1);
  CHECK(std::count(rows.begin(), rows.end(), 7) == 1);
  CHECK(m.mask.count() == 32);
  CHECK(m.achieved_acceleration() == 2.0);
}

TEST_CASE("gen_mask preconditions")
{
  CHECK_THROWS_AS(gen_mask(acq(1, 8, 8, 1.0, 2, 0)), Error);
  CHECK_THROWS_AS(gen_mask(acq(1, 8, 8, 0.5, 2, 0)), Error);
  // Budget of 1 row per frame cannot hold 2 centre lines.
  CHECK_THROWS_AS(gen_mask(acq(4, 8, 8, 8.0, 2, 0)), Error);
  CHECK_THROWS_AS(gen_mask(acq(0, 8, 8, 4.0, 2, 0)), Error);
}

TEST_CASE("gen_mask is deterministic and varies across frames and seeds")
{
  auto const cfg = acq(8, 32, 32, 4.0, 2, 11);
  auto const a = gen_mask(cfg);
  CHECK(a.mask == gen_mask(cfg).mask);
  CHECK_FALSE(a.mask == gen_mask(acq(8, 32, 32, 4.0, 2, 12)).mask);
  std::set<std::vector<std::size_t>> distinct;
  for (std::size_t t = 0; t < 8; ++t) { distinct.insert(a.sampled_rows(t)); }
  CHECK(distinct.size() > 1);
}

TEST_CASE("gen_mask meets the requested acceleration within 10% and keeps the centre")
{
  for (double accel : {4.0, 8.0, 12.0}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto const m = gen_mask(acq(8, 32, 32, accel, 2, seed));
      CHECK(std::abs(m.achieved_acceleration() / accel - 1.0) <= 0.1);
      CHECK_NOTHROW(validate_mask(m));
      for (std::size_t t = 0; t < 8; ++t) {
        CHECK(m.row_sampled(t, 0));
        CHECK(m.row_sampled(t, 31));
      }
    }
  }
}

TEST_CASE("gen_mask favours low frequencies")
{
  std::size_t low = 0;
  std::size_t high = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto const m = gen_mask(acq(8, 32, 32, 8.0, 2, seed));
    for (std::size_t t = 0; t < 8; ++t) {
      for (auto y : m.sampled_rows(t)) {
        auto const f = std::abs(row_frequency(y, 32));
        if (f >= 1 && f <= 4) { ++low; }
        if (f >= 12) { ++high; }
      }
    }
  }
  CHECK(low > 3 * high);
}

TEST_CASE("split_mask on a 4-line instance")
{
  // Centre rows 0 and 7, other rows 2 and 5 (|f| = 2 and 3).
  auto const P = row_mask(1, 8, 8, {{0, 2, 5, 7}}, 2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto const tr = split_mask(P, seed, 0.25);
    auto const theta = tr.P_theta.sampled_rows(0);
    auto const lambda = tr.P_lambda.sampled_rows(0);
    REQUIRE(theta.size() == 3);
    REQUIRE(lambda.size() == 3);
    std::size_t const t_other = theta[1];
    std::size_t const l_other = lambda[1];
    CHECK(theta.front() == 0);
    CHECK(theta.back() == 7);
    CHECK(lambda.front() == 0);
    CHECK(lambda.back() == 7);
    CHECK(((t_other == 2 && l_other == 5) || (t_other == 5 && l_other == 2)));
    CHECK_FALSE(tr.P_theta.mask == tr.P_lambda.mask);
    CHECK_NOTHROW(validate_triplet(tr));
  }
}

TEST_CASE("split_mask adds the lowest-frequency rows to P_lambda")
{
  auto const P = row_mask(1, 8, 8, {{0, 2, 5, 7}}, 2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto const tr = split_mask(P, seed, 0.5);
    // floor(0.5 * 2) = 1 row: the lowest |f| non-centre row is 2.
    CHECK(tr.P_lambda.row_sampled(0, 2));
    CHECK(tr.P_lambda.row_sampled(0, 5) != tr.P_theta.row_sampled(0, 5));
    auto const full = split_mask(P, seed, 1.0);
    CHECK(full.P_lambda.mask == P.mask);
  }
}

TEST_CASE("split_mask errors and determinism")
{
  auto const P = gen_mask(acq(8, 32, 32, 4.0, 2, 3));
  CHECK(split_mask(P, 9, 0.5).P_theta.mask == split_mask(P, 9, 0.5).P_theta.mask);
  CHECK_THROWS_AS(split_mask(P, 9, 0.0), Error);
  CHECK_THROWS_AS(split_mask(P, 9, 1.5), Error);
  auto empty = row_mask(1, 8, 8, {{}}, 0);
  CHECK_THROWS_AS(split_mask(empty, 0, 0.5), Error);
  auto centre_only = row_mask(1, 8, 8, {{0, 7}}, 2);
  CHECK_THROWS_AS(split_mask(centre_only, 0, 0.5), Error);
}

TEST_CASE("mask triplet invariants across 100 seeds and several accelerations")
{
  std::size_t checked = 0;
  for (double accel : {4.0, 8.0, 12.0, 14.0}) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      auto const P = gen_mask(acq(8, 64, 16, accel, 2, seed));
      auto const tr = split_mask(P, mix_seed(seed, 1), 0.5);
      auto const &p = tr.P.mask.bits;
      auto const &a = tr.P_theta.mask.bits;
      auto const &b = tr.P_lambda.mask.bits;
      bool ok = true;
      for (std::size_t i = 0; i < p.size(); ++i) { ok = ok && (a[i] | b[i]) == p[i] && a[i] <= p[i] && b[i] <= p[i]; }
      CHECK(ok);
      CHECK_FALSE(a == b);
      for (std::size_t t = 0; t < 8; ++t) {
        for (auto y : center_rows(2, 64)) {
          CHECK(tr.P_theta.row_sampled(t, y));
          CHECK(tr.P_lambda.row_sampled(t, y));
        }
      }
      ++checked;
    }
  }
  CHECK(checked == 400);
}

TEST_CASE("validate_triplet rejects violations")
{
  auto const P = row_mask(1, 8, 8, {{0, 2, 5, 7}}, 2);
  auto tr = split_mask(P, 1, 0.25);
  auto bad = tr;
  bad.P_theta.mask = bad.P_lambda.mask;
  CHECK_THROWS_AS(validate_triplet(bad), Error);
  bad = tr;
  bad.P_lambda.mask.bits[8 * 3] = 1; // row 3 is outside P
  CHECK_THROWS_AS(validate_triplet(bad), Error);
  bad = tr;
  std::fill_n(bad.P_theta.mask.bits.begin(), 8, std::uint8_t{0}); // drop centre row 0
  CHECK_THROWS_AS(validate_triplet(bad), Error);
}

TEST_CASE("forward_model examples")
{
  auto const x = random_tensor({2, 8, 8}, 1);
  auto const all = row_mask(2, 8, 8, {{0, 1, 2, 3, 4, 5, 6, 7}}, 0);
  CHECK(values_of(forward_model(x, all, 0.0)) == values_of(fft2(x)));

  auto const m = random_half_mask(2, 8, 8, 4);
  auto const y_zero = forward_model(Tensor::zeros({2, 8, 8}), m, 0.0);
  for (auto const &v : y_zero.data()) { CHECK(v == cx{}); }

  std::vector<cx> delta(64);
  delta[0] = 1.0;
  auto const line0 = row_mask(1, 8, 8, {{0}}, 0);
  auto const y = forward_model(Tensor({1, 8, 8}, delta), line0, 0.0);
  for (std::size_t i = 0; i < 64; ++i) {
    cx const expected = i < 8 ? cx{1.0 / 8.0, 0.0} : cx{};
    CHECK(std::abs(y.data()[i] - expected) < 1e-15);
  }
  CHECK_THROWS_AS(forward_model(random_tensor({1, 8, 8}, 0), all, 0.0), ShapeError);
}

TEST_CASE("forward_model noise stays on the mask and is seeded")
{
  auto const x = random_tensor({2, 8, 8}, 1);
  auto const m = random_half_mask(2, 8, 8, 5);
  auto const a = forward_model(x, m, 0.05, 3);
  auto const b = forward_model(x, m, 0.05, 3);
  CHECK(values_of(a) == values_of(b));
  CHECK_FALSE(values_of(a) == values_of(forward_model(x, m, 0.05, 4)));
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (!m.mask.bits[i]) { CHECK(a.data()[i] == cx{}); }
  }
  CHECK_THROWS_AS(forward_model(x, m, -1.0), NumericError);
}

TEST_CASE("zero_filled examples")
{
  auto const x = random_tensor({2, 8, 8}, 3);
  auto const all = row_mask(2, 8, 8, {{0, 1, 2, 3, 4, 5, 6, 7}}, 0);
  CHECK(max_abs_diff(zero_filled(fft2(x), all).data(), x.data()) < 1e-12);
  auto const x_zero = zero_filled(Tensor::zeros({2, 8, 8}), all);
  for (auto const &v : x_zero.data()) { CHECK(v == cx{}); }

  auto const half = row_mask(1, 8, 8, {{0, 1, 3, 7}}, 2);
  auto const frame = random_tensor({1, 8, 8}, 7);
  auto const y = forward_model(frame, half, 0.0);
  auto const oracle = naive_dft2(values_of(y), 8, 8, true);
  CHECK(max_abs_diff(zero_filled(y, half).data(), oracle) < 1e-10);
}

TEST_CASE("data_consistency examples")
{
  auto const x_true = random_tensor({2, 8, 8}, 1);
  auto const x_pred = random_tensor({2, 8, 8}, 2);
  auto const all = row_mask(2, 8, 8, {{0, 1, 2, 3, 4, 5, 6, 7}}, 0);
  CHECK(max_abs_diff(data_consistency(x_pred, fft2(x_true), all).data(), x_true.data()) < 1e-12);

  auto const none = row_mask(2, 8, 8, {{}}, 0);
  CHECK(max_abs_diff(data_consistency(x_pred, Tensor::zeros({2, 8, 8}), none).data(), x_pred.data()) < 1e-12);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto const m = random_half_mask(2, 8, 8, seed + 10);
    auto const y = forward_model(random_tensor({2, 8, 8}, seed), m, 0.0);
    auto const xp = random_tensor({2, 8, 8}, seed + 20);
    auto const k_out = naive_dft2(values_of(data_consistency(xp, y, m)), 8, 8);
    auto const k_pred = naive_dft2(values_of(xp), 8, 8);
    double err = 0.0;
    for (std::size_t i = 0; i < k_out.size(); ++i) {
      cx const expected = m.mask.bits[i] ? y.data()[i] : k_pred[i];
      err = std::max(err, std::abs(k_out[i] - expected));
    }
    CHECK(err < 1e-12);
  }
  CHECK_THROWS_AS(data_consistency(random_tensor({1, 8, 8}, 0), Tensor::zeros({2, 8, 8}), all), ShapeError);
}

TEST_CASE("data_consistency is idempotent and forward_model is a projection")
{
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto const P = gen_mask(acq(4, 16, 16, 4.0, 2, seed));
    auto const x = random_tensor({4, 16, 16}, seed);
    auto const y = forward_model(x, P, 0.0);
    auto const xp = random_tensor({4, 16, 16}, seed + 100);
    auto const once = data_consistency(xp, y, P);
    auto const twice = data_consistency(once, y, P);
    CHECK(max_abs_diff(once.data(), twice.data()) < 1e-12);
    auto const k = fft2(once);
    double err = 0.0;
    for (std::size_t i = 0; i < k.numel(); ++i) {
      if (P.mask.bits[i]) { err = std::max(err, std::abs(k.data()[i] - y.data()[i])); }
    }
    CHECK(err < 1e-12);
    auto const again = forward_model(zero_filled(y, P), P, 0.0);
    CHECK(max_abs_diff(again.data(), y.data()) < 1e-12);
  }
}

TEST_CASE("data_consistency gradient is k-space masking")
{
  auto const P = random_half_mask(2, 4, 4, 3);
  auto const y = forward_model(random_tensor({2, 4, 4}, 1), P, 0.0);
  auto const target = random_tensor({2, 4, 4}, 2);
  auto x = random_param({2, 4, 4}, 4);
  auto loss = [&] { return mse_loss(data_consistency(x, y, P), target); };
  backward(loss());
  auto const num = numeric_grad([&] { return loss().item().real(); }, x);
  CHECK(rel_error(x.grad(), num) < 1e-6);
}

TEST_CASE("mask file round trip and corruption")
{
  auto const m = gen_mask(acq(4, 16, 8, 4.0, 2, 1));
  auto const path = std::filesystem::temp_directory_path() / "scl_test.mask";
  save_mask(path, m);
  auto const back = load_mask(path);
  CHECK(back.mask == m.mask);
  CHECK(back.center_lines >= 2);
  CHECK(back.achieved_acceleration() == m.achieved_acceleration());

  auto bytes = io::read_file(path);
  CHECK(bytes.size() == 5 + 12 + 4 * 16 * 8);
  bytes[1] = 'X';
  io::write_file(path, bytes);
  CHECK_THROWS_AS(load_mask(path), FormatError);
  bytes[1] = 'A';
  bytes.back() = 2;
  io::write_file(path, bytes);
  CHECK_THROWS_AS(load_mask(path), FormatError);
  bytes.pop_back();
  io::write_file(path, bytes);
  CHECK_THROWS_AS(load_mask(path), FormatError);
  std::filesystem::remove(path);
}
