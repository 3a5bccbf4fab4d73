#pragma once

// Internal layer kernels. Feature maps are (channels x batch*height*width)
// row-major matrices; row c holds channel c's planes for every sample, one
// after another, so a batch reads as one tall image of batch*height rows.

#include <Eigen/Dense>

#include <cstddef>
#include <span>

namespace lipgate::layers {

using Map2 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using KernelView = Eigen::Map<const Map2>;
using KernelGrad = Eigen::Map<Map2>;

struct ConvShape {
  std::size_t in_ch = 1;
  std::size_t out_ch = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t k = 1;  // odd; zero "same" padding of k/2
  std::size_t batch = 1;

  std::size_t plane() const { return height * width; }
};

/// Correlation with a [out_ch, in_ch, k, k] kernel plus per-channel bias.
Map2 conv_forward(const Map2& in, const ConvShape& s, std::span<const double> kernel,
                  std::span<const double> bias);

/// Accumulates kernel/bias gradients; writes d_in when non-null.
void conv_backward(const Map2& in, const ConvShape& s, std::span<const double> kernel,
                   const Map2& d_out, std::span<double> d_kernel, std::span<double> d_bias,
                   Map2* d_in);

/// Stride-1 "same" transposed convolution with a [in_ch, out_ch, k, k] kernel.
Map2 conv_transpose_forward(const Map2& in, const ConvShape& s, std::span<const double> kernel,
                            std::span<const double> bias);
void conv_transpose_backward(const Map2& in, const ConvShape& s, std::span<const double> kernel,
                             const Map2& d_out, std::span<double> d_kernel,
                             std::span<double> d_bias, Map2* d_in);

// A batch of even-height planes pools/upsamples as one image of batch*height rows.
Map2 avg_pool2(const Map2& in, std::size_t height, std::size_t width);
Map2 avg_pool2_backward(const Map2& d_out, std::size_t height, std::size_t width);
Map2 upsample2(const Map2& in, std::size_t height, std::size_t width);
Map2 upsample2_backward(const Map2& d_out, std::size_t height, std::size_t width);

}  // namespace lipgate::layers
