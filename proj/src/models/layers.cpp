#include "layers.hpp"

#include <algorithm>
#include <vector>

namespace lipgate::layers {

namespace {

// Columns per im2col tile; keeps a 16x5x5 or 16x7x7 tile inside L2.
constexpr std::size_t kTilePixels = 128;

struct RowSpan {
  long dy = 0;
  long dx = 0;
  std::size_t x_lo = 0;  // valid output columns [x_lo, x_hi)
  std::size_t x_hi = 0;
};

RowSpan row_span(const ConvShape& s, std::size_t ky, std::size_t kx) {
  const long pad = static_cast<long>(s.k / 2);
  RowSpan r;
  r.dy = static_cast<long>(ky) - pad;
  r.dx = static_cast<long>(kx) - pad;
  const long w = static_cast<long>(s.width);
  r.x_lo = static_cast<std::size_t>(std::clamp(-r.dx, 0L, w));
  r.x_hi = static_cast<std::size_t>(std::clamp(w - r.dx, 0L, w));
  return r;
}

// Patch matrix for global image rows [g0, g1) of the batch (batch*height rows).
void im2col(const Map2& in, const ConvShape& s, std::size_t g0, std::size_t g1, Map2& cols) {
  const std::size_t hw = s.plane();
  const std::size_t w = s.width;
  cols.resize(static_cast<long>(s.in_ch * s.k * s.k), static_cast<long>((g1 - g0) * w));
  for (std::size_t c = 0; c < s.in_ch; ++c) {
    for (std::size_t ky = 0; ky < s.k; ++ky) {
      for (std::size_t kx = 0; kx < s.k; ++kx) {
        const RowSpan r = row_span(s, ky, kx);
        double* dst_base = cols.row(static_cast<long>((c * s.k + ky) * s.k + kx)).data();
        for (std::size_t g = g0; g < g1; ++g) {
          const std::size_t b = g / s.height, y = g % s.height;
          double* row = dst_base + (g - g0) * w;
          const long sy = static_cast<long>(y) + r.dy;
          if (sy < 0 || sy >= static_cast<long>(s.height) || r.x_lo >= r.x_hi) {
            std::fill(row, row + w, 0.0);
            continue;
          }
          const double* src = in.row(static_cast<long>(c)).data() + b * hw + sy * static_cast<long>(w) + r.dx;
          std::fill(row, row + r.x_lo, 0.0);
          std::copy(src + r.x_lo, src + r.x_hi, row + r.x_lo);
          std::fill(row + r.x_hi, row + w, 0.0);
        }
      }
    }
  }
}

// Adjoint of im2col: scatters a tile of patch gradients into `out`.
void col2im(const Map2& cols, const ConvShape& s, std::size_t g0, std::size_t g1, Map2& out) {
  const std::size_t hw = s.plane();
  const std::size_t w = s.width;
  for (std::size_t c = 0; c < s.in_ch; ++c) {
    for (std::size_t ky = 0; ky < s.k; ++ky) {
      for (std::size_t kx = 0; kx < s.k; ++kx) {
        const RowSpan r = row_span(s, ky, kx);
        const double* src_base = cols.row(static_cast<long>((c * s.k + ky) * s.k + kx)).data();
        for (std::size_t g = g0; g < g1; ++g) {
          const std::size_t b = g / s.height, y = g % s.height;
          const long sy = static_cast<long>(y) + r.dy;
          if (sy < 0 || sy >= static_cast<long>(s.height)) continue;
          double* dst = out.row(static_cast<long>(c)).data() + b * hw + sy * static_cast<long>(w) + r.dx;
          const double* row = src_base + (g - g0) * w;
          for (std::size_t x = r.x_lo; x < r.x_hi; ++x) dst[x] += row[x];
        }
      }
    }
  }
}

// Single-output-channel layers skip im2col: each kernel tap is a shifted row axpy.
template <class Visit>
void for_each_tap(const ConvShape& s, Visit&& visit) {
  const std::size_t hw = s.plane();
  const std::size_t rows = s.batch * s.height;
  for (std::size_t g = 0; g < rows; ++g) {
    const std::size_t b = g / s.height, y = g % s.height;
    for (std::size_t c = 0; c < s.in_ch; ++c) {
      for (std::size_t ky = 0; ky < s.k; ++ky) {
        for (std::size_t kx = 0; kx < s.k; ++kx) {
          const RowSpan r = row_span(s, ky, kx);
          const long sy = static_cast<long>(y) + r.dy;
          if (sy < 0 || sy >= static_cast<long>(s.height) || r.x_lo >= r.x_hi) continue;
          const std::size_t src = b * hw + static_cast<std::size_t>(sy) * s.width;
          visit(g * s.width, c, (c * s.k + ky) * s.k + kx, static_cast<std::ptrdiff_t>(src) + r.dx, r);
        }
      }
    }
  }
}

Map2 conv_forward_single(const Map2& in, const ConvShape& s, std::span<const double> kernel, double bias) {
  Map2 out = Map2::Constant(1, static_cast<long>(s.batch * s.plane()), bias);
  double* o = out.data();
  for_each_tap(s, [&](std::size_t dst, std::size_t c, std::size_t tap, std::ptrdiff_t src, const RowSpan& r) {
    const double w = kernel[tap];
    const double* x = in.row(static_cast<long>(c)).data() + src;
    for (std::size_t i = r.x_lo; i < r.x_hi; ++i) o[dst + i] += w * x[i];
  });
  return out;
}

void conv_backward_single(const Map2& in, const ConvShape& s, std::span<const double> kernel,
                          const Map2& d_out, std::span<double> d_kernel, Map2* d_in) {
  const double* d = d_out.data();
  for_each_tap(s, [&](std::size_t dst, std::size_t c, std::size_t tap, std::ptrdiff_t src, const RowSpan& r) {
    const double* x = in.row(static_cast<long>(c)).data() + src;
    double acc = 0.0;
    for (std::size_t i = r.x_lo; i < r.x_hi; ++i) acc += d[dst + i] * x[i];
    d_kernel[tap] += acc;
    if (d_in != nullptr) {
      const double w = kernel[tap];
      double* dx = d_in->row(static_cast<long>(c)).data() + src;
      for (std::size_t i = r.x_lo; i < r.x_hi; ++i) dx[i] += w * d[dst + i];
    }
  });
}

std::size_t tile_rows(const ConvShape& s) { return std::max<std::size_t>(1, kTilePixels / s.width); }

// [in, out, k, k] transposed-conv kernel -> equivalent [out, in, k, k] correlation kernel.
std::vector<double> flip_kernel(std::span<const double> kernel, std::size_t first,
                                std::size_t second, std::size_t k) {
  std::vector<double> out(kernel.size());
  for (std::size_t a = 0; a < first; ++a)
    for (std::size_t b = 0; b < second; ++b)
      for (std::size_t y = 0; y < k; ++y)
        for (std::size_t x = 0; x < k; ++x)
          out[((b * first + a) * k + (k - 1 - y)) * k + (k - 1 - x)] =
              kernel[((a * second + b) * k + y) * k + x];
  return out;
}

}  // namespace

Map2 conv_forward(const Map2& in, const ConvShape& s, std::span<const double> kernel,
                  std::span<const double> bias) {
  if (s.out_ch == 1) return conv_forward_single(in, s, kernel, bias[0]);
  KernelView w(kernel.data(), static_cast<long>(s.out_ch), static_cast<long>(s.in_ch * s.k * s.k));
  const std::size_t rows = s.batch * s.height;
  Map2 out(static_cast<long>(s.out_ch), static_cast<long>(rows * s.width));
  Map2 cols;
  for (std::size_t g0 = 0; g0 < rows; g0 += tile_rows(s)) {
    const std::size_t g1 = std::min(rows, g0 + tile_rows(s));
    im2col(in, s, g0, g1, cols);
    out.middleCols(static_cast<long>(g0 * s.width), cols.cols()).noalias() = w * cols;
  }
  for (std::size_t o = 0; o < s.out_ch; ++o) out.row(static_cast<long>(o)).array() += bias[o];
  return out;
}

void conv_backward(const Map2& in, const ConvShape& s, std::span<const double> kernel,
                   const Map2& d_out, std::span<double> d_kernel, std::span<double> d_bias,
                   Map2* d_in) {
  const long fan = static_cast<long>(s.in_ch * s.k * s.k);
  KernelGrad dw(d_kernel.data(), static_cast<long>(s.out_ch), fan);
  KernelView w(kernel.data(), static_cast<long>(s.out_ch), fan);
  const std::size_t rows = s.batch * s.height;
  if (d_in != nullptr) *d_in = Map2::Zero(static_cast<long>(s.in_ch), static_cast<long>(rows * s.width));
  if (s.out_ch == 1) {
    conv_backward_single(in, s, kernel, d_out, d_kernel, d_in);
    d_bias[0] += d_out.sum();
    return;
  }
  Map2 cols, d_cols;
  for (std::size_t g0 = 0; g0 < rows; g0 += tile_rows(s)) {
    const std::size_t g1 = std::min(rows, g0 + tile_rows(s));
    im2col(in, s, g0, g1, cols);
    const auto d_tile = d_out.middleCols(static_cast<long>(g0 * s.width), cols.cols());
    dw.noalias() += d_tile * cols.transpose();
    if (d_in != nullptr) {
      d_cols.noalias() = w.transpose() * d_tile;
      col2im(d_cols, s, g0, g1, *d_in);
    }
  }
  for (std::size_t o = 0; o < s.out_ch; ++o) d_bias[o] += d_out.row(static_cast<long>(o)).sum();
}

Map2 conv_transpose_forward(const Map2& in, const ConvShape& s, std::span<const double> kernel,
                            std::span<const double> bias) {
  const std::vector<double> flipped = flip_kernel(kernel, s.in_ch, s.out_ch, s.k);
  return conv_forward(in, s, flipped, bias);
}

void conv_transpose_backward(const Map2& in, const ConvShape& s, std::span<const double> kernel,
                             const Map2& d_out, std::span<double> d_kernel,
                             std::span<double> d_bias, Map2* d_in) {
  const std::vector<double> flipped = flip_kernel(kernel, s.in_ch, s.out_ch, s.k);
  std::vector<double> d_flipped(kernel.size(), 0.0);
  conv_backward(in, s, flipped, d_out, d_flipped, d_bias, d_in);
  // flip_kernel is an involution up to the axis swap.
  const std::vector<double> back = flip_kernel(d_flipped, s.out_ch, s.in_ch, s.k);
  for (std::size_t i = 0; i < back.size(); ++i) d_kernel[i] += back[i];
}

Map2 avg_pool2(const Map2& in, std::size_t height, std::size_t width) {
  const std::size_t oh = height / 2;
  const std::size_t ow = width / 2;
  Map2 out(in.rows(), oh * ow);
  for (long c = 0; c < in.rows(); ++c) {
    const double* src = in.row(c).data();
    double* dst = out.row(c).data();
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const double* p = src + 2 * y * width + 2 * x;
        dst[y * ow + x] = 0.25 * (p[0] + p[1] + p[width] + p[width + 1]);
      }
  }
  return out;
}

Map2 avg_pool2_backward(const Map2& d_out, std::size_t height, std::size_t width) {
  const std::size_t ow = width / 2;
  Map2 d_in(d_out.rows(), height * width);
  for (long c = 0; c < d_out.rows(); ++c) {
    const double* src = d_out.row(c).data();
    double* dst = d_in.row(c).data();
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) dst[y * width + x] = 0.25 * src[(y / 2) * ow + x / 2];
  }
  return d_in;
}

Map2 upsample2(const Map2& in, std::size_t height, std::size_t width) {
  const std::size_t ow = 2 * width;
  Map2 out(in.rows(), 4 * height * width);
  for (long c = 0; c < in.rows(); ++c) {
    const double* src = in.row(c).data();
    double* dst = out.row(c).data();
    for (std::size_t y = 0; y < 2 * height; ++y)
      for (std::size_t x = 0; x < ow; ++x) dst[y * ow + x] = src[(y / 2) * width + x / 2];
  }
  return out;
}

Map2 upsample2_backward(const Map2& d_out, std::size_t height, std::size_t width) {
  const std::size_t ow = 2 * width;
  Map2 d_in = Map2::Zero(d_out.rows(), height * width);
  for (long c = 0; c < d_out.rows(); ++c) {
    const double* src = d_out.row(c).data();
    double* dst = d_in.row(c).data();
    for (std::size_t y = 0; y < 2 * height; ++y)
      for (std::size_t x = 0; x < ow; ++x) dst[(y / 2) * width + x / 2] += src[y * ow + x];
  }
  return d_in;
}

}  // namespace lipgate::layers
