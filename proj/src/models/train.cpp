#include "lipgate/error.hpp"
#include "lipgate/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace lipgate {

RmsPropState RmsPropState::zeros_like(const std::vector<Tensor>& weights) {
  RmsPropState s;
  for (const auto& t : weights) {
    s.mean_square.emplace_back(t.size(), 0.0);
    s.velocity.emplace_back(t.size(), 0.0);
  }
  return s;
}

void rmsprop_step(std::vector<Tensor>& weights, const std::vector<Tensor>& grads,
                  RmsPropState& state, const TrainConfig& cfg) {
  if (grads.size() != weights.size() || state.mean_square.size() != weights.size())
    throw ShapeError("rmsprop: weights, gradients and state disagree in tensor count");
  const bool with_momentum = cfg.momentum > 0.0;
  if (with_momentum && state.velocity.size() != weights.size())
    throw ShapeError("rmsprop: momentum buffers missing");
  for (std::size_t t = 0; t < weights.size(); ++t) {
    auto& w = weights[t].data;
    const auto& g = grads[t].data;
    auto& v = state.mean_square[t];
    if (g.size() != w.size() || v.size() != w.size())
      throw ShapeError("rmsprop: shape mismatch in tensor '" + weights[t].name + "'");
    if (with_momentum) {
      auto& u = state.velocity[t];
      for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = cfg.rms_decay * v[i] + (1.0 - cfg.rms_decay) * g[i] * g[i];
        u[i] = cfg.momentum * u[i] + cfg.learning_rate * g[i] / std::sqrt(v[i] + cfg.epsilon);
        w[i] -= u[i];
      }
    } else {
      for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = cfg.rms_decay * v[i] + (1.0 - cfg.rms_decay) * g[i] * g[i];
        w[i] -= cfg.learning_rate * g[i] / std::sqrt(v[i] + cfg.epsilon);
      }
    }
  }
}

TrainResult train(ReconModel model, std::span<const Example> data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.empty()) throw InvalidArgument("train needs a non-empty dataset");
  for (const auto& ex : data) {
    if (ex.input.size() != model.spec.input_dim() || ex.target.size() != model.spec.output_dim())
      throw ShapeError("training example does not match the model's input/output widths");
  }

  TrainResult result{std::move(model), {}};
  RmsPropState state = RmsPropState::zeros_like(result.model.weights);
  std::vector<std::size_t> order(data.size());
  std::vector<Example> batch;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(cfg.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double total = 0.0;
    double data_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(data[order[i]]);
      const std::uint64_t dropout_seed = mix_seed(mix_seed(cfg.seed, epoch), 1 + batches);
      LossAndGrad lg;
      try {
        lg = loss_and_grad(result.model, batch, cfg, dropout_seed);
      } catch (const NonFiniteLossError& e) {
        throw NonFiniteLossError(e.layer(), std::string(e.what()) + " (epoch " +
                                                std::to_string(epoch) + ", batch " +
                                                std::to_string(batches) + ")");
      }
      rmsprop_step(result.model.weights, lg.grads, state, cfg);
      total += lg.loss.total;
      data_loss += lg.loss.data_loss;
      ++batches;
    }
    EpochStats stats{epoch, total / double(batches), data_loss / double(batches)};
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

}  // namespace lipgate
