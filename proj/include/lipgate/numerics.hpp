#pragma once

// Deterministic numerical kernels: 2D DFT, parallel-beam Radon transform,
// filtered backprojection and seeded noise.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lipgate {

/// Square n x n real image, row-major.
struct Image {
  std::size_t n = 0;
  std::vector<double> pixels;

  Image() = default;
  explicit Image(std::size_t side) : n(side), pixels(side * side, 0.0) {}
  Image(std::size_t side, std::vector<double> values);

  double& at(std::size_t row, std::size_t col) { return pixels[row * n + col]; }
  double at(std::size_t row, std::size_t col) const { return pixels[row * n + col]; }
  std::size_t size() const { return pixels.size(); }

  bool operator==(const Image&) const = default;
};

/// Fourier coefficients of an Image (unnormalized forward convention).
struct KSpace {
  std::size_t n = 0;
  std::vector<double> re;
  std::vector<double> im;

  /// [re..., im...], the sensor-domain layout fed to the fully connected nets.
  std::vector<double> concat() const;
  static KSpace from_concat(std::size_t n, std::span<const double> values);
};

/// Parallel-beam projections: `views` rows of `detectors` line integrals.
struct Sinogram {
  std::size_t image_size = 0;
  std::size_t views = 0;
  std::size_t detectors = 0;
  std::vector<double> values;      // views x detectors, row-major
  std::vector<double> angles_deg;  // uniformly spaced over [0, 180)

  double& at(std::size_t view, std::size_t bin) { return values[view * detectors + bin]; }
  double at(std::size_t view, std::size_t bin) const { return values[view * detectors + bin]; }

  /// Keeps every `factor`-th view starting at view 0.
  Sinogram subsample(std::size_t factor) const;
};

enum class NoiseKind { GaussianAdditive, Multiplicative };

struct NoiseSpec {
  double fraction = 0.0;
  NoiseKind kind = NoiseKind::GaussianAdditive;
  std::uint64_t seed = 0;
};

/// Throws InvalidArgument unless n >= 4 and a power of two.
void validate_side(std::size_t n);

KSpace dft2(const Image& img);

struct InverseDft {
  Image image;
  double imag_residual = 0.0;  // L-inf norm of the discarded imaginary part
};

/// Inverse DFT with 1/n^2 normalization. Logs a warning when the input is
/// conjugate-symmetric but the imaginary residual exceeds 1e-6.
InverseDft idft2_checked(const KSpace& k);
Image idft2(const KSpace& k);

/// ceil(n * sqrt(2)), bumped to the next odd value.
std::size_t detector_count(std::size_t n);

Sinogram radon(const Image& img, std::size_t views);
Image iradon_fbp(const Sinogram& sin);

std::vector<double> apply_noise(std::span<const double> data, const NoiseSpec& spec,
                                double reference_std);

/// Population standard deviation.
double std_dev(std::span<const double> values);

/// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace lipgate
