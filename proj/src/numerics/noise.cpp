#include "lipgate/error.hpp"
#include "lipgate/numerics.hpp"

#include <cmath>
#include <random>

namespace lipgate {

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double std_dev(std::span<const double> values) {
  if (values.empty()) return 0.0;
  long double mean = 0.0L;
  for (double v : values) mean += v;
  mean /= static_cast<long double>(values.size());
  long double ss = 0.0L;
  for (double v : values) ss += (v - mean) * (v - mean);
  return static_cast<double>(std::sqrt(ss / static_cast<long double>(values.size())));
}

std::vector<double> apply_noise(std::span<const double> data, const NoiseSpec& spec,
                                double reference_std) {
  if (!(spec.fraction >= 0.0 && spec.fraction <= 1.0))
    throw InvalidArgument("noise fraction must lie in [0, 1]");
  if (spec.kind == NoiseKind::GaussianAdditive && !(reference_std >= 0.0))
    throw InvalidArgument("reference std must be >= 0");

  std::vector<double> out(data.begin(), data.end());
  if (spec.fraction == 0.0) return out;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (spec.kind == NoiseKind::GaussianAdditive) {
    const double sigma = spec.fraction * reference_std;
    for (double& v : out) v += sigma * gauss(rng);
  } else {
    for (double& v : out) v *= 1.0 + spec.fraction * gauss(rng);
  }
  return out;
}

}  // namespace lipgate
