#pragma once

// Desk-scale reconstruction networks: a fully connected AUTOMAP-style net
// (optionally with dropout after the first convolution) and a residual
// U-Net denoiser, with RMSProp training.

#include "lipgate/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lipgate {

enum class ArchKind { Automap, AutomapDropout, UnetResidual };
enum class Activation { Identity, Tanh, Relu };

std::string_view to_string(ArchKind kind);
ArchKind parse_arch_kind(std::string_view text);
std::string_view to_string(Activation act);

struct TensorInfo {
  std::string name;
  std::vector<std::size_t> shape;
  bool penalized = false;  // weight matrix/kernel (l2 applies), not a bias
};

struct ArchSpec {
  ArchKind kind = ArchKind::Automap;
  std::size_t n = 32;
  std::size_t fc1_width = 0;  // automap kinds only
  std::size_t conv_filters = 16;
  std::size_t conv_kernel = 5;
  std::size_t final_kernel = 7;  // transposed-conv output layer
  double dropout_p = 0.0;
  double input_scale = 1.0;  // fixed (untrained) gain on the network input

  /// fc1_width = round(1.526 n^2); input scaled by 1/(4n), a quarter of the
  /// unitary-DFT gain.
  static ArchSpec automap(std::size_t n);
  static ArchSpec automap_dropout(std::size_t n, double p = 0.25);
  static ArchSpec unet_residual(std::size_t n);

  std::size_t input_dim() const;
  std::size_t output_dim() const { return n * n; }
  bool is_automap() const { return kind != ArchKind::UnetResidual; }

  /// Throws InvalidArgument on inconsistent fields.
  void validate() const;

  /// Tensor names and shapes in declaration (= serialization) order.
  std::vector<TensorInfo> layout() const;
  std::vector<std::pair<std::string, Activation>> activation_schedule() const;

  bool operator==(const ArchSpec&) const = default;
};

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;

  std::size_t size() const { return data.size(); }
  bool operator==(const Tensor&) const = default;
};

struct ReconModel {
  ArchSpec spec;
  std::vector<Tensor> weights;
  std::uint64_t rng_seed = 0;

  Tensor& tensor(std::string_view name);
  const Tensor& tensor(std::string_view name) const;

  /// Checks weight shapes against spec.layout() and that all values are finite.
  void validate() const;
};

ReconModel init_model(const ArchSpec& spec, std::uint64_t seed);

struct ForwardMode {
  bool stochastic = false;
  std::uint64_t seed = 0;

  static ForwardMode deterministic() { return {}; }
  static ForwardMode sampled(std::uint64_t seed) { return {true, seed}; }
};

/// Single input. Stochastic mode draws the dropout mask from `mode.seed`.
Image forward(const ReconModel& m, std::span<const double> x,
              ForwardMode mode = ForwardMode::deterministic());

/// Batched forward; in stochastic mode sample j uses mix_seed(mode.seed, j).
std::vector<std::vector<double>> forward_batch(const ReconModel& m,
                                               std::span<const std::vector<double>> xs,
                                               ForwardMode mode = ForwardMode::deterministic());

/// One stochastic forward of the same input per seed. The layers ahead of the
/// dropout are evaluated once; output k equals forward(m, x, sampled(seeds[k])).
std::vector<std::vector<double>> forward_repeated(const ReconModel& m, std::span<const double> x,
                                                  std::span<const std::uint64_t> seeds);

/// Inverted dropout: zero each entry with probability p, scale survivors by 1/(1-p).
std::vector<double> dropout(std::span<const double> values, double p, std::uint64_t seed);

struct TrainConfig {
  double learning_rate = 2e-5;
  double rms_decay = 0.9;
  double momentum = 0.0;
  std::size_t batch_size = 50;
  std::size_t epochs = 100;
  double l2_lambda = 1e-3;
  double l1_gamma = 1e-4;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  static TrainConfig automap_defaults();
  static TrainConfig unet_defaults();
  static TrainConfig defaults_for(ArchKind kind);

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct LossReport {
  double data_loss = 0.0;
  double l2_penalty = 0.0;
  double l1_penalty = 0.0;
  double total = 0.0;
};

struct Example {
  std::span<const double> input;
  std::span<const double> target;
};

struct LossAndGrad {
  LossReport loss;
  std::vector<Tensor> grads;  // same names/shapes/order as the model weights
};

/// Sum-squared data loss plus l2 on every weight matrix/kernel and l1 on the
/// post-activation map of the second convolution. Dropout (if any) is active,
/// with sample j's mask seeded by mix_seed(dropout_seed, j).
LossAndGrad loss_and_grad(const ReconModel& m, std::span<const Example> batch,
                          const TrainConfig& cfg, std::uint64_t dropout_seed = 0);

/// Loss only; same conventions as loss_and_grad.
LossReport evaluate_loss(const ReconModel& m, std::span<const Example> batch,
                         const TrainConfig& cfg, std::uint64_t dropout_seed = 0);

struct RmsPropState {
  std::vector<std::vector<double>> mean_square;
  std::vector<std::vector<double>> velocity;  // used only when momentum > 0

  static RmsPropState zeros_like(const std::vector<Tensor>& weights);
};

/// v' = decay v + (1 - decay) g^2;  w' = w - lr g / sqrt(v' + eps).
/// With momentum > 0: u' = momentum u + lr g / sqrt(v' + eps);  w' = w - u'.
void rmsprop_step(std::vector<Tensor>& weights, const std::vector<Tensor>& grads,
                  RmsPropState& state, const TrainConfig& cfg);

struct EpochStats {
  std::size_t epoch = 0;
  double mean_total_loss = 0.0;
  double mean_data_loss = 0.0;
};

struct TrainResult {
  ReconModel model;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Minibatch RMSProp; the shuffle for epoch e is seeded by mix_seed(cfg.seed, e).
/// History records the mean over minibatches of each loss term.
TrainResult train(ReconModel model, std::span<const Example> data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace lipgate
