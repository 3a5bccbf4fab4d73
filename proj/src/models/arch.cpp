#include "lipgate/error.hpp"
#include "lipgate/models.hpp"

#include <cmath>
#include <random>

namespace lipgate {

std::string_view to_string(ArchKind kind) {
  switch (kind) {
    case ArchKind::Automap: return "automap";
    case ArchKind::AutomapDropout: return "automap-dropout";
    case ArchKind::UnetResidual: return "unet-residual";
  }
  return "?";
}

ArchKind parse_arch_kind(std::string_view text) {
  if (text == "automap") return ArchKind::Automap;
  if (text == "automap-dropout") return ArchKind::AutomapDropout;
  if (text == "unet-residual") return ArchKind::UnetResidual;
  throw InvalidArgument("unknown architecture kind '" + std::string(text) + "'");
}

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
  }
  return "?";
}

ArchSpec ArchSpec::automap(std::size_t n) {
  ArchSpec s;
  s.kind = ArchKind::Automap;
  s.n = n;
  // 25000 / 16384 hidden-to-output ratio of the full-size network.
  s.fc1_width = static_cast<std::size_t>(std::lround(1.526 * static_cast<double>(n * n)));
  // A quarter of the unitary-DFT gain keeps the tanh layers out of saturation
  // on bright, frame-filling inputs.
  s.input_scale = 0.25 / static_cast<double>(n);
  return s;
}

ArchSpec ArchSpec::automap_dropout(std::size_t n, double p) {
  ArchSpec s = automap(n);
  s.kind = ArchKind::AutomapDropout;
  s.dropout_p = p;
  return s;
}

ArchSpec ArchSpec::unet_residual(std::size_t n) {
  ArchSpec s;
  s.kind = ArchKind::UnetResidual;
  s.n = n;
  s.fc1_width = 0;
  return s;
}

std::size_t ArchSpec::input_dim() const { return is_automap() ? 2 * n * n : n * n; }

void ArchSpec::validate() const {
  validate_side(n);
  if (conv_filters == 0) throw InvalidArgument("conv_filters must be positive");
  if (conv_kernel % 2 == 0) throw InvalidArgument("conv_kernel must be odd");
  if (final_kernel % 2 == 0) throw InvalidArgument("final_kernel must be odd");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw InvalidArgument("dropout_p must lie in [0, 1)");
  if (dropout_p > 0.0 && kind != ArchKind::AutomapDropout)
    throw InvalidArgument("dropout_p > 0 requires kind automap-dropout");
  if (!(std::isfinite(input_scale) && input_scale > 0.0))
    throw InvalidArgument("input_scale must be finite and positive");
  if (is_automap() && fc1_width == 0) throw InvalidArgument("automap needs fc1_width > 0");
  if (!is_automap() && fc1_width != 0) throw InvalidArgument("fc1_width applies to automap only");
}

std::vector<TensorInfo> ArchSpec::layout() const {
  const std::size_t f = conv_filters;
  const std::size_t k = conv_kernel;
  const std::size_t kf = final_kernel;
  std::vector<TensorInfo> out;
  auto add = [&](std::string base, std::vector<std::size_t> shape, std::size_t bias) {
    out.push_back({base + ".weight", std::move(shape), true});
    out.push_back({base + ".bias", {bias}, false});
  };
  if (is_automap()) {
    add("fc1", {fc1_width, input_dim()}, fc1_width);
    add("fc2", {n * n, fc1_width}, n * n);
    add("conv1", {f, 1, k, k}, f);
    add("conv2", {f, f, k, k}, f);
  } else {
    add("enc1", {f, 1, k, k}, f);
    add("enc2", {f, f, k, k}, f);
    add("enc3", {f, f, k, k}, f);
    add("dec2", {f, f, k, k}, f);
    add("dec1", {f, f, k, k}, f);
  }
  add("deconv", {f, 1, kf, kf}, 1);
  return out;
}

std::vector<std::pair<std::string, Activation>> ArchSpec::activation_schedule() const {
  if (is_automap())
    return {{"fc1", Activation::Tanh},
            {"fc2", Activation::Identity},
            {"conv1", Activation::Tanh},
            {"conv2", Activation::Relu},
            {"deconv", Activation::Identity}};
  return {{"enc1", Activation::Relu}, {"enc2", Activation::Relu},   {"enc3", Activation::Relu},
          {"dec2", Activation::Relu}, {"dec1", Activation::Relu},   {"deconv", Activation::Identity}};
}

Tensor& ReconModel::tensor(std::string_view name) {
  for (auto& t : weights)
    if (t.name == name) return t;
  throw InvalidArgument("no tensor named '" + std::string(name) + "'");
}

const Tensor& ReconModel::tensor(std::string_view name) const {
  for (const auto& t : weights)
    if (t.name == name) return t;
  throw InvalidArgument("no tensor named '" + std::string(name) + "'");
}

void ReconModel::validate() const {
  spec.validate();
  const auto layout = spec.layout();
  if (layout.size() != weights.size())
    throw ShapeError("model has " + std::to_string(weights.size()) + " tensors, spec expects " +
                     std::to_string(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Tensor& t = weights[i];
    if (t.name != layout[i].name || t.shape != layout[i].shape)
      throw ShapeError("tensor " + std::to_string(i) + " ('" + t.name +
                       "') does not match spec tensor '" + layout[i].name + "'");
    std::size_t count = 1;
    for (auto d : t.shape) count *= d;
    if (t.data.size() != count) throw ShapeError("tensor '" + t.name + "' has wrong element count");
    for (double v : t.data)
      if (!std::isfinite(v)) throw InvalidArgument("tensor '" + t.name + "' has non-finite values");
  }
}

ReconModel init_model(const ArchSpec& spec, std::uint64_t seed) {
  spec.validate();
  ReconModel m;
  m.spec = spec;
  m.rng_seed = seed;
  const auto layout = spec.layout();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& info = layout[i];
    Tensor t{info.name, info.shape, {}};
    std::size_t count = 1;
    for (auto d : info.shape) count *= d;
    t.data.assign(count, 0.0);
    if (info.penalized) {
      const std::size_t receptive = info.shape.size() == 4 ? info.shape[2] * info.shape[3] : 1;
      const double fans = static_cast<double>((info.shape[0] + info.shape[1]) * receptive);
      const double bound = std::sqrt(6.0 / fans);
      std::mt19937_64 rng(mix_seed(seed, i));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& v : t.data) v = dist(rng);
    }
    m.weights.push_back(std::move(t));
  }
  return m;
}

TrainConfig TrainConfig::automap_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::unet_defaults() {
  TrainConfig c;
  c.learning_rate = 2e-4;
  c.batch_size = 100;
  return c;
}

TrainConfig TrainConfig::defaults_for(ArchKind kind) {
  return kind == ArchKind::UnetResidual ? unet_defaults() : automap_defaults();
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
  if (!(rms_decay > 0.0 && rms_decay < 1.0)) throw InvalidArgument("rms_decay must lie in (0, 1)");
  if (!(momentum >= 0.0)) throw InvalidArgument("momentum must be >= 0");
  if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
  if (!(l2_lambda >= 0.0)) throw InvalidArgument("l2_lambda must be >= 0");
  if (!(l1_gamma >= 0.0)) throw InvalidArgument("l1_gamma must be >= 0");
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be > 0");
}

}  // namespace lipgate
