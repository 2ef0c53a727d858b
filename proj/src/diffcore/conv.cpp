#include "selfcolearn/error.hpp"
#include "selfcolearn/ops.hpp"

#include <Eigen/Core>
#include <fmt/format.h>

namespace scl {

namespace {

using Mat = Eigen::Matrix<cx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Geometry
{
  std::size_t batch, c_in, c_out, h, w, k, pad;

  auto hw() const -> std::size_t { return h * w; }
  auto rows() const -> std::size_t { return c_in * k * k; }
  auto cols() const -> std::size_t { return batch * hw(); }
};

// cols(ci * k * k + dy * k + dx, b * HW + y * W + x) = in[b, ci, y + dy - pad, x + dx - pad]
void im2col(std::span<cx const> in, Geometry const &g, Mat &cols)
{
  cols.setZero(static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
  auto const h = static_cast<std::ptrdiff_t>(g.h);
  auto const w = static_cast<std::ptrdiff_t>(g.w);
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    for (std::size_t dy = 0; dy < g.k; ++dy) {
      for (std::size_t dx = 0; dx < g.k; ++dx) {
        auto const row = static_cast<Eigen::Index>((ci * g.k + dy) * g.k + dx);
        auto const oy = static_cast<std::ptrdiff_t>(dy) - static_cast<std::ptrdiff_t>(g.pad);
        auto const ox = static_cast<std::ptrdiff_t>(dx) - static_cast<std::ptrdiff_t>(g.pad);
        cx *dst = cols.row(row).data();
        for (std::size_t b = 0; b < g.batch; ++b) {
          cx const *src = in.data() + (b * g.c_in + ci) * g.hw();
          cx *out = dst + b * g.hw();
          for (std::ptrdiff_t y = 0; y < h; ++y) {
            auto const sy = y + oy;
            if (sy < 0 || sy >= h) { continue; }
            auto const x0 = std::max<std::ptrdiff_t>(0, -ox);
            auto const x1 = std::min<std::ptrdiff_t>(w, w - ox);
            for (std::ptrdiff_t x = x0; x < x1; ++x) { out[y * w + x] = src[sy * w + x + ox]; }
          }
        }
      }
    }
  }
}

void col2im_add(Mat const &cols, Geometry const &g, std::span<cx> grad_in)
{
  auto const h = static_cast<std::ptrdiff_t>(g.h);
  auto const w = static_cast<std::ptrdiff_t>(g.w);
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    for (std::size_t dy = 0; dy < g.k; ++dy) {
      for (std::size_t dx = 0; dx < g.k; ++dx) {
        auto const row = static_cast<Eigen::Index>((ci * g.k + dy) * g.k + dx);
        auto const oy = static_cast<std::ptrdiff_t>(dy) - static_cast<std::ptrdiff_t>(g.pad);
        auto const ox = static_cast<std::ptrdiff_t>(dx) - static_cast<std::ptrdiff_t>(g.pad);
        cx const *src = cols.row(row).data();
        for (std::size_t b = 0; b < g.batch; ++b) {
          cx *dst = grad_in.data() + (b * g.c_in + ci) * g.hw();
          cx const *in = src + b * g.hw();
          for (std::ptrdiff_t y = 0; y < h; ++y) {
            auto const sy = y + oy;
            if (sy < 0 || sy >= h) { continue; }
            auto const x0 = std::max<std::ptrdiff_t>(0, -ox);
            auto const x1 = std::min<std::ptrdiff_t>(w, w - ox);
            for (std::ptrdiff_t x = x0; x < x1; ++x) { dst[sy * w + x + ox] += in[y * w + x]; }
          }
        }
      }
    }
  }
}

} // namespace

auto conv2d(Tensor const &input, Tensor const &kernel, Tensor const &bias) -> Tensor
{
  bool const batched = input.rank() == 4;
  if (input.rank() != 3 && !batched) {
    throw ShapeError(fmt::format("conv2d: input must be [C,H,W] or [B,C,H,W], got {}", shape_string(input.shape())));
  }
  if (kernel.rank() != 4 || kernel.dim(2) != kernel.dim(3)) {
    throw ShapeError(fmt::format("conv2d: kernel must be [C_out,C_in,k,k], got {}", shape_string(kernel.shape())));
  }
  Geometry g{};
  g.batch = batched ? input.dim(0) : 1;
  g.c_in = input.dim(batched ? 1 : 0);
  g.h = input.dim(batched ? 2 : 1);
  g.w = input.dim(batched ? 3 : 2);
  g.c_out = kernel.dim(0);
  g.k = kernel.dim(2);
  g.pad = (g.k - 1) / 2;
  if (g.k % 2 == 0) { throw ShapeError(fmt::format("conv2d: kernel size {} must be odd", g.k)); }
  if (kernel.dim(1) != g.c_in) {
    throw ShapeError(fmt::format("conv2d: kernel expects {} input channels, input has {}", kernel.dim(1), g.c_in));
  }
  bool const has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{g.c_out}) {
    throw ShapeError(fmt::format("conv2d: bias must be [{}], got {}", g.c_out, shape_string(bias.shape())));
  }

  Mat cols;
  im2col(input.data(), g, cols);
  Eigen::Map<Mat const> const weights(kernel.data().data(), static_cast<Eigen::Index>(g.c_out),
                                      static_cast<Eigen::Index>(g.rows()));
  Mat product(static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.cols()));
  product.noalias() = weights * cols;

  std::vector<cx> out(g.batch * g.c_out * g.hw());
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t o = 0; o < g.c_out; ++o) {
      cx const offset = has_bias ? bias.data()[o] : cx{};
      cx const *src = product.row(static_cast<Eigen::Index>(o)).data() + b * g.hw();
      cx *dst = out.data() + (b * g.c_out + o) * g.hw();
      for (std::size_t p = 0; p < g.hw(); ++p) { dst[p] = src[p] + offset; }
    }
  }

  Shape shape = batched ? Shape{g.batch, g.c_out, g.h, g.w} : Shape{g.c_out, g.h, g.w};
  std::vector<Tensor> parents{input, kernel};
  if (has_bias) { parents.push_back(bias); }
  return make_result("conv2d", std::move(shape), std::move(out), parents, [g, has_bias](GradContext &ctx) {
    auto const gout = ctx.grad_out();
    Mat grad(static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.cols()));
    for (std::size_t b = 0; b < g.batch; ++b) {
      for (std::size_t o = 0; o < g.c_out; ++o) {
        cx const *src = gout.data() + (b * g.c_out + o) * g.hw();
        cx *dst = grad.row(static_cast<Eigen::Index>(o)).data() + b * g.hw();
        std::copy(src, src + g.hw(), dst);
      }
    }
    if (has_bias && ctx.needs(2)) {
      auto gb = ctx.grad(2);
      for (std::size_t o = 0; o < g.c_out; ++o) { gb[o] += grad.row(static_cast<Eigen::Index>(o)).sum(); }
    }
    Eigen::Map<Mat const> const weights(ctx.input(1).data(), static_cast<Eigen::Index>(g.c_out),
                                        static_cast<Eigen::Index>(g.rows()));
    if (ctx.needs(1)) {
      Mat cols;
      im2col(ctx.input(0), g, cols);
      Eigen::Map<Mat> gk(ctx.grad(1).data(), static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.rows()));
      gk.noalias() += grad * cols.adjoint();
    }
    if (ctx.needs(0)) {
      Mat gcols(static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
      gcols.noalias() = weights.adjoint() * grad;
      col2im_add(gcols, g, ctx.grad(0));
    }
  });
}

} // namespace scl
