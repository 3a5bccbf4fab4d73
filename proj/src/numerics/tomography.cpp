#include "lipgate/error.hpp"
#include "lipgate/numerics.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

namespace lipgate {

namespace {

// Step along each ray, in pixels.
constexpr double kRayStep = 0.5;

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// Bilinear interpolation on pixel centres; zero outside the grid.
// (x, y) are Cartesian coordinates with the origin at the image centre, y up.
double sample_bilinear(const Image& img, double x, double y) {
  const double half = 0.5 * static_cast<double>(img.n - 1);
  const double col = x + half;
  const double row = half - y;
  const double c0f = std::floor(col);
  const double r0f = std::floor(row);
  const long c0 = static_cast<long>(c0f);
  const long r0 = static_cast<long>(r0f);
  const double fc = col - c0f;
  const double fr = row - r0f;
  const long n = static_cast<long>(img.n);
  auto px = [&](long r, long c) {
    return (r < 0 || c < 0 || r >= n || c >= n) ? 0.0 : img.pixels[r * n + c];
  };
  return (1 - fr) * ((1 - fc) * px(r0, c0) + fc * px(r0, c0 + 1)) +
         fr * ((1 - fc) * px(r0 + 1, c0) + fc * px(r0 + 1, c0 + 1));
}

std::size_t next_pow2(std::size_t v) {
  std::size_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

// Ramp-filters every view: convolution with the band-limited ramp kernel
// (h[0] = 1/4, h[odd k] = -1/(pi k)^2), carried out as a product in the
// zero-padded detector-frequency domain.
std::vector<double> ramp_filter(const Sinogram& sin) {
  const std::size_t d = sin.detectors;
  const std::size_t len = next_pow2(2 * d);
  const std::size_t bins = len / 2 + 1;

  double* real_buf = fftw_alloc_real(len);
  fftw_complex* freq = fftw_alloc_complex(bins);
  fftw_plan fwd;
  fftw_plan inv;
  {
    std::lock_guard lock(plan_mutex());
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(len), real_buf, freq, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(static_cast<int>(len), freq, real_buf, FFTW_ESTIMATE);
  }

  std::fill(real_buf, real_buf + len, 0.0);
  real_buf[0] = 0.25;
  for (std::size_t k = 1; k < len / 2; k += 2) {
    const double v = -1.0 / (std::numbers::pi * std::numbers::pi * double(k) * double(k));
    real_buf[k] = v;
    real_buf[len - k] = v;
  }
  fftw_execute(fwd);
  std::vector<double> response(bins);
  for (std::size_t i = 0; i < bins; ++i) response[i] = freq[i][0];

  std::vector<double> filtered(sin.views * d);
  for (std::size_t v = 0; v < sin.views; ++v) {
    std::fill(real_buf, real_buf + len, 0.0);
    for (std::size_t b = 0; b < d; ++b) real_buf[b] = sin.at(v, b);
    fftw_execute(fwd);
    for (std::size_t i = 0; i < bins; ++i) {
      freq[i][0] *= response[i];
      freq[i][1] *= response[i];
    }
    fftw_execute(inv);
    for (std::size_t b = 0; b < d; ++b) filtered[v * d + b] = real_buf[b] / double(len);
  }

  {
    std::lock_guard lock(plan_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }
  fftw_free(real_buf);
  fftw_free(freq);
  return filtered;
}

}  // namespace

std::size_t detector_count(std::size_t n) {
  auto d = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * std::numbers::sqrt2));
  return d % 2 == 0 ? d + 1 : d;
}

Sinogram Sinogram::subsample(std::size_t factor) const {
  if (factor == 0 || views % factor != 0)
    throw InvalidArgument("view factor " + std::to_string(factor) + " does not divide " +
                          std::to_string(views) + " views");
  Sinogram out;
  out.image_size = image_size;
  out.detectors = detectors;
  out.views = views / factor;
  out.values.reserve(out.views * detectors);
  for (std::size_t v = 0; v < views; v += factor) {
    out.values.insert(out.values.end(), values.begin() + v * detectors,
                      values.begin() + (v + 1) * detectors);
    out.angles_deg.push_back(angles_deg[v]);
  }
  return out;
}

Sinogram radon(const Image& img, std::size_t views) {
  validate_side(img.n);
  if (views == 0) throw InvalidArgument("radon needs at least one view");
  Sinogram sin;
  sin.image_size = img.n;
  sin.views = views;
  sin.detectors = detector_count(img.n);
  sin.values.assign(views * sin.detectors, 0.0);
  sin.angles_deg.resize(views);

  const double centre = 0.5 * static_cast<double>(sin.detectors - 1);
  // Rays span the detector width, which covers the image diagonal.
  const auto samples = static_cast<std::size_t>(std::ceil(double(sin.detectors) / kRayStep)) + 1;
  const double tau0 = -0.5 * kRayStep * static_cast<double>(samples - 1);

  for (std::size_t v = 0; v < views; ++v) {
    const double deg = 180.0 * static_cast<double>(v) / static_cast<double>(views);
    sin.angles_deg[v] = deg;
    const double theta = deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    for (std::size_t b = 0; b < sin.detectors; ++b) {
      const double t = static_cast<double>(b) - centre;
      double acc = 0.0;
      for (std::size_t m = 0; m < samples; ++m) {
        const double tau = tau0 + kRayStep * static_cast<double>(m);
        acc += sample_bilinear(img, t * c - tau * s, t * s + tau * c);
      }
      sin.at(v, b) = acc * kRayStep;
    }
  }
  return sin;
}

Image iradon_fbp(const Sinogram& sin) {
  validate_side(sin.image_size);
  if (sin.views == 0 || sin.detectors == 0 || sin.values.size() != sin.views * sin.detectors ||
      sin.angles_deg.size() != sin.views)
    throw ShapeError("inconsistent sinogram dimensions");

  const std::vector<double> filtered = ramp_filter(sin);
  const std::size_t n = sin.image_size;
  const std::size_t d = sin.detectors;
  const double centre = 0.5 * static_cast<double>(d - 1);
  const double half = 0.5 * static_cast<double>(n - 1);
  Image out(n);

  for (std::size_t v = 0; v < sin.views; ++v) {
    const double theta = sin.angles_deg[v] * std::numbers::pi / 180.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double* q = filtered.data() + v * d;
    for (std::size_t r = 0; r < n; ++r) {
      const double y = half - static_cast<double>(r);
      for (std::size_t col = 0; col < n; ++col) {
        const double x = static_cast<double>(col) - half;
        const double u = x * c + y * s + centre;
        const double u0f = std::floor(u);
        const long u0 = static_cast<long>(u0f);
        const double f = u - u0f;
        double val = 0.0;
        if (u0 >= 0 && u0 < long(d)) val += (1 - f) * q[u0];
        if (u0 + 1 >= 0 && u0 + 1 < long(d)) val += f * q[u0 + 1];
        out.at(r, col) += val;
      }
    }
  }
  const double scale = std::numbers::pi / static_cast<double>(sin.views);
  for (double& p : out.pixels) p *= scale;
  return out;
}

}  // namespace lipgate
