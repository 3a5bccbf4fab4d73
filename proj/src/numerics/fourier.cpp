#include "lipgate/error.hpp"
#include "lipgate/log.hpp"
#include "lipgate/numerics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>

namespace lipgate {

namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t count)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * count))) {
    if (data == nullptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* data;
};

void transform_2d(std::size_t n, fftw_complex* buf, int sign) {
  fftw_plan plan;
  {
    std::lock_guard lock(plan_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(n), buf, buf, sign,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(plan_mutex());
  fftw_destroy_plan(plan);
}

bool is_conjugate_symmetric(const KSpace& k) {
  const std::size_t n = k.n;
  double scale = 0.0;
  for (std::size_t i = 0; i < k.re.size(); ++i)
    scale = std::max({scale, std::abs(k.re[i]), std::abs(k.im[i])});
  const double tol = 1e-9 * std::max(scale, 1.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t a = r * n + c;
      const std::size_t b = ((n - r) % n) * n + (n - c) % n;
      if (std::abs(k.re[a] - k.re[b]) > tol || std::abs(k.im[a] + k.im[b]) > tol) return false;
    }
  }
  return true;
}

}  // namespace

Image::Image(std::size_t side, std::vector<double> values) : n(side), pixels(std::move(values)) {
  if (pixels.size() != n * n)
    throw ShapeError("image of side " + std::to_string(n) + " needs " + std::to_string(n * n) +
                     " pixels, got " + std::to_string(pixels.size()));
}

std::vector<double> KSpace::concat() const {
  std::vector<double> out;
  out.reserve(re.size() + im.size());
  out.insert(out.end(), re.begin(), re.end());
  out.insert(out.end(), im.begin(), im.end());
  return out;
}

KSpace KSpace::from_concat(std::size_t n, std::span<const double> values) {
  if (values.size() != 2 * n * n)
    throw ShapeError("k-space concat of side " + std::to_string(n) + " needs " +
                     std::to_string(2 * n * n) + " values, got " + std::to_string(values.size()));
  KSpace k;
  k.n = n;
  k.re.assign(values.begin(), values.begin() + n * n);
  k.im.assign(values.begin() + n * n, values.end());
  return k;
}

void validate_side(std::size_t n) {
  if (n < 4 || (n & (n - 1)) != 0)
    throw InvalidArgument("image side must be a power of two >= 4, got " + std::to_string(n));
}

KSpace dft2(const Image& img) {
  validate_side(img.n);
  const std::size_t count = img.n * img.n;
  FftwBuffer buf(count);
  for (std::size_t i = 0; i < count; ++i) {
    buf.data[i][0] = img.pixels[i];
    buf.data[i][1] = 0.0;
  }
  transform_2d(img.n, buf.data, FFTW_FORWARD);
  KSpace k;
  k.n = img.n;
  k.re.resize(count);
  k.im.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    k.re[i] = buf.data[i][0];
    k.im[i] = buf.data[i][1];
  }
  return k;
}

InverseDft idft2_checked(const KSpace& k) {
  validate_side(k.n);
  const std::size_t count = k.n * k.n;
  if (k.re.size() != count || k.im.size() != count) throw ShapeError("k-space arrays do not match n");
  FftwBuffer buf(count);
  for (std::size_t i = 0; i < count; ++i) {
    buf.data[i][0] = k.re[i];
    buf.data[i][1] = k.im[i];
  }
  transform_2d(k.n, buf.data, FFTW_BACKWARD);
  InverseDft out{Image(k.n), 0.0};
  const double norm = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.image.pixels[i] = buf.data[i][0] * norm;
    out.imag_residual = std::max(out.imag_residual, std::abs(buf.data[i][1] * norm));
  }
  if (out.imag_residual > 1e-6 && is_conjugate_symmetric(k))
    log_warning("idft2: imaginary residual " + std::to_string(out.imag_residual) +
                " on conjugate-symmetric input");
  return out;
}

Image idft2(const KSpace& k) { return idft2_checked(k).image; }

}  // namespace lipgate
