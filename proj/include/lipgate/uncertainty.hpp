#pragma once

// Perturbation-based uncertainty scores: the local Lipschitz estimate, the
// k-draw output variance used for out-of-distribution detection, and the
// MC-dropout and deep-ensemble baselines.

#include "lipgate/models.hpp"
#include "lipgate/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace lipgate {

inline constexpr double kDefaultNoiseFraction = 0.05;
inline constexpr std::size_t kDefaultVarianceDraws = 4;
inline constexpr std::size_t kDefaultMcIterations = 50;
inline constexpr std::size_t kDefaultEnsembleSize = 5;

/// Any map from sensor input to a flattened image, evaluated in batches.
class Reconstructor {
 public:
  using BatchFn =
      std::function<std::vector<std::vector<double>>(std::span<const std::vector<double>>)>;
  using SingleFn = std::function<std::vector<double>(std::span<const double>)>;

  Reconstructor(std::size_t input_dim, std::size_t output_dim, BatchFn fn);

  /// Deterministic forward of `model`; the model must outlive the Reconstructor.
  static Reconstructor from_model(const ReconModel& model);
  static Reconstructor from_function(std::size_t input_dim, std::size_t output_dim, SingleFn fn);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }

  std::vector<std::vector<double>> operator()(std::span<const std::vector<double>> xs) const;

 private:
  std::size_t input_dim_;
  std::size_t output_dim_;
  BatchFn fn_;
};

struct LipschitzScore {
  double value = 0.0;
  double noise_fraction = 0.0;
  double input_norm = 0.0;   // L1 norm of the input difference
  double output_norm = 0.0;  // L1 norm of the output difference
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
};

struct VarianceScore {
  double value = 0.0;  // mean over pixels of the unbiased per-pixel variance
  std::size_t k = 0;
};

enum class MapMethod { LipschitzDiff, PerturbationVariance, McVariance, EnsembleVariance };
std::string_view to_string(MapMethod m);

struct UncertaintyMap {
  std::vector<double> pixels;
  MapMethod method = MapMethod::LipschitzDiff;
};

struct LipschitzResult {
  LipschitzScore score;
  UncertaintyMap map;  // |phi(x') - phi(x)| per pixel
};

struct VarianceResult {
  VarianceScore score;
  UncertaintyMap map;  // per-pixel variance
};

struct BaselineResult {
  LipschitzScore lipschitz;
  VarianceScore variance;
  UncertaintyMap lipschitz_map;
  UncertaintyMap variance_map;
  std::vector<double> mean_clean;
  std::vector<double> mean_noisy;
  std::vector<std::vector<double>> clean_outputs;
};

/// x + e, e ~ N(0, (noise_fraction * std(x))^2) drawn from `seed`.
/// Throws DegenerateInputError when std(x) == 0.
std::vector<double> perturb(std::span<const double> x, double noise_fraction, std::uint64_t seed);

/// (||dy||_1 / dim_out) / (||dx||_1 / dim_in).
LipschitzScore lipschitz_ratio(std::span<const double> x0, std::span<const double> x1,
                               std::span<const double> y0, std::span<const double> y1);

LipschitzResult local_lipschitz(const Reconstructor& phi, std::span<const double> x,
                                double noise_fraction, std::uint64_t seed);
LipschitzResult local_lipschitz(const ReconModel& model, std::span<const double> x,
                                double noise_fraction, std::uint64_t seed);

/// Outputs for perturbations seeded base_seed + i, i < k.
VarianceResult perturbation_variance(const Reconstructor& phi, std::span<const double> x,
                                     double noise_fraction, std::size_t k, std::uint64_t base_seed);
VarianceResult perturbation_variance(const ReconModel& model, std::span<const double> x,
                                     double noise_fraction, std::size_t k, std::uint64_t base_seed);

/// Dropout seeds for the clean (stream 0) and noisy (stream 1) MC passes.
std::uint64_t mc_pass_seed(std::uint64_t seed, std::size_t stream, std::size_t iteration);

/// `iterations` stochastic passes over x and over one fixed x' = perturb(x, p, seed).
/// Lipschitz from the two mean outputs; variance across the clean passes.
BaselineResult mc_dropout_scores(const ReconModel& model, std::span<const double> x,
                                 double noise_fraction, std::size_t iterations,
                                 std::uint64_t seed);

/// Lipschitz of the ensemble-mean output under a shared perturbation; variance
/// across member outputs of the clean input.
BaselineResult ensemble_scores(std::span<const ReconModel> models, std::span<const double> x,
                               double noise_fraction, std::uint64_t seed);

/// Lipschitz ratio between two given inputs (e.g. 10% and 15% noisy inputs).
LipschitzResult lipschitz_pairwise(const Reconstructor& phi, std::span<const double> x_lo,
                                   std::span<const double> x_hi);
LipschitzResult lipschitz_pairwise(const ReconModel& model, std::span<const double> x_lo,
                                   std::span<const double> x_hi);

/// Elementwise mean and unbiased variance across equally sized vectors.
std::vector<double> elementwise_mean(std::span<const std::vector<double>> outputs);
std::vector<double> elementwise_variance(std::span<const std::vector<double>> outputs);

}  // namespace lipgate
