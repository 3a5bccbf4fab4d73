#pragma once

// Synthetic phantoms standing in for brain (in-distribution) and knee
// (out-of-distribution) scans, the reflection-tiling augmentation, and the
// three task-specific input/target builders.

#include "lipgate/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace lipgate {

enum class PhantomFamily { IdEllipse, OodBlock };
enum class Task { Automap, Denoise, Ct };
enum class Encoding { KSpaceConcat, ImageNoisy, ImageSparseCt };

std::string_view to_string(PhantomFamily f);
std::string_view to_string(Task t);
PhantomFamily parse_family(std::string_view text);
Task parse_task(std::string_view text);
Encoding encoding_for(Task t);

/// Seed offsets that keep test phantoms disjoint from training phantoms.
inline constexpr std::uint64_t kIdTestSeedOffset = std::uint64_t{1} << 32;
inline constexpr std::uint64_t kOodTestSeedOffset = std::uint64_t{2} << 32;

struct Phantom {
  Image image;
  PhantomFamily family = PhantomFamily::IdEllipse;
  std::uint64_t seed = 0;
};

struct SensorInput {
  std::vector<double> values;
  Encoding encoding = Encoding::KSpaceConcat;
  std::size_t n = 0;
};

struct SampleMeta {
  std::uint64_t phantom_seed = 0;
  std::uint64_t noise_seed = 0;
  Task task = Task::Automap;
  PhantomFamily family = PhantomFamily::IdEllipse;
  bool augmented = false;
};

struct SamplePair {
  SensorInput input;
  Image target;
  SampleMeta meta;
};

Phantom make_phantom(PhantomFamily family, std::size_t n, std::uint64_t seed);

/// Four-reflection 2n x 2n tiling (original | h-flip / v-flip | both) and a
/// uniformly random n x n crop with offsets in [0, n].
Image augment(const Image& img, std::uint64_t seed);
Image augment_crop(const Image& img, std::size_t row_offset, std::size_t col_offset);

/// Input: concatenated (re, im) of dft2(image) with `train_noise` applied.
SamplePair encode_automap_pair(const Phantom& ph, const NoiseSpec& train_noise);

/// Input: idft2 of the k-space with additive Gaussian noise at noise_frac of
/// the std of the concatenated (re, im) values.
SamplePair make_denoise_pair(const Phantom& ph, double noise_frac, std::uint64_t seed);

struct CtOptions {
  std::size_t full_views = 360;
  std::size_t factor = 4;
  double noise_frac = 0.10;
};

/// Input: FBP of the noisy sinogram keeping every factor-th view (noise added
/// before subsampling). Target: FBP of the full clean sinogram.
SamplePair make_ct_pair(const Phantom& ph, const CtOptions& opts, std::uint64_t seed);

/// Builds one pair for `task`; noise_fraction is the multiplicative k-space
/// level (automap), the k-space Gaussian level (denoise) or the sinogram level (ct).
SamplePair make_pair(Task task, const Phantom& ph, double noise_fraction, std::uint64_t seed,
                     const CtOptions& ct = {});

struct DatasetSpec {
  Task task = Task::Automap;
  PhantomFamily family = PhantomFamily::IdEllipse;
  std::size_t count = 1;
  std::size_t n = 32;
  std::uint64_t base_seed = 0;
  bool augment = false;
  double noise_fraction = 0.0;
  CtOptions ct;
};

/// Seed for the noise of sample `index` (phantom seed base_seed + index).
std::uint64_t sample_noise_seed(std::uint64_t base_seed, std::size_t index);

/// Sample i uses phantom seed base_seed + i, and independent derived seeds for
/// noise and augmentation.
std::vector<SamplePair> build_dataset(const DatasetSpec& spec);

}  // namespace lipgate
