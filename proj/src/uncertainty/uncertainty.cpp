#include "lipgate/uncertainty.hpp"

#include "lipgate/error.hpp"

#include <cmath>

namespace lipgate {

namespace {

void require_fraction(double noise_fraction) {
  if (!(noise_fraction > 0.0 && noise_fraction <= 1.0))
    throw InvalidArgument("noise_fraction must lie in (0, 1]");
}

void require_dim(const Reconstructor& phi, std::span<const double> x) {
  if (x.size() != phi.input_dim())
    throw ShapeError("input width " + std::to_string(x.size()) + " does not match " +
                     std::to_string(phi.input_dim()));
}

std::vector<double> abs_diff(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::abs(a[i] - b[i]);
  return out;
}

double mean_of(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(MapMethod m) {
  switch (m) {
    case MapMethod::LipschitzDiff: return "lipschitz-diff";
    case MapMethod::PerturbationVariance: return "perturbation-variance";
    case MapMethod::McVariance: return "mc-variance";
    case MapMethod::EnsembleVariance: return "ensemble-variance";
  }
  return "?";
}

Reconstructor::Reconstructor(std::size_t input_dim, std::size_t output_dim, BatchFn fn)
    : input_dim_(input_dim), output_dim_(output_dim), fn_(std::move(fn)) {}

Reconstructor Reconstructor::from_model(const ReconModel& model) {
  return Reconstructor(model.spec.input_dim(), model.spec.output_dim(),
                       [&model](std::span<const std::vector<double>> xs) {
                         return forward_batch(model, xs);
                       });
}

Reconstructor Reconstructor::from_function(std::size_t input_dim, std::size_t output_dim,
                                           SingleFn fn) {
  return Reconstructor(input_dim, output_dim,
                       [f = std::move(fn)](std::span<const std::vector<double>> xs) {
                         std::vector<std::vector<double>> out;
                         out.reserve(xs.size());
                         for (const auto& x : xs) out.push_back(f(x));
                         return out;
                       });
}

std::vector<std::vector<double>> Reconstructor::operator()(
    std::span<const std::vector<double>> xs) const {
  auto out = fn_(xs);
  if (out.size() != xs.size()) throw ShapeError("reconstructor returned a wrong batch size");
  for (const auto& y : out)
    if (y.size() != output_dim_) throw ShapeError("reconstructor returned a wrong output width");
  return out;
}

std::vector<double> perturb(std::span<const double> x, double noise_fraction, std::uint64_t seed) {
  require_fraction(noise_fraction);
  const double sigma = std_dev(x);
  if (!(sigma > 0.0))
    throw DegenerateInputError("input has zero standard deviation; perturbation is undefined");
  return apply_noise(x, {noise_fraction, NoiseKind::GaussianAdditive, seed}, sigma);
}

LipschitzScore lipschitz_ratio(std::span<const double> x0, std::span<const double> x1,
                               std::span<const double> y0, std::span<const double> y1) {
  if (x0.size() != x1.size() || y0.size() != y1.size())
    throw ShapeError("lipschitz_ratio: mismatched vector lengths");
  LipschitzScore s;
  s.input_dim = x0.size();
  s.output_dim = y0.size();
  for (std::size_t i = 0; i < x0.size(); ++i) s.input_norm += std::abs(x1[i] - x0[i]);
  for (std::size_t i = 0; i < y0.size(); ++i) s.output_norm += std::abs(y1[i] - y0[i]);
  if (!(s.input_norm > 0.0))
    throw DegenerateInputError("inputs are identical; Lipschitz ratio has a zero denominator");
  s.value = (s.output_norm / static_cast<double>(s.output_dim)) /
            (s.input_norm / static_cast<double>(s.input_dim));
  return s;
}

LipschitzResult local_lipschitz(const Reconstructor& phi, std::span<const double> x,
                                double noise_fraction, std::uint64_t seed) {
  require_dim(phi, x);
  std::vector<std::vector<double>> inputs;
  inputs.emplace_back(x.begin(), x.end());
  inputs.push_back(perturb(x, noise_fraction, seed));
  const auto outs = phi(inputs);
  LipschitzResult r;
  r.score = lipschitz_ratio(inputs[0], inputs[1], outs[0], outs[1]);
  r.score.noise_fraction = noise_fraction;
  r.map = {abs_diff(outs[1], outs[0]), MapMethod::LipschitzDiff};
  return r;
}

LipschitzResult local_lipschitz(const ReconModel& model, std::span<const double> x,
                                double noise_fraction, std::uint64_t seed) {
  return local_lipschitz(Reconstructor::from_model(model), x, noise_fraction, seed);
}

std::vector<double> elementwise_mean(std::span<const std::vector<double>> outputs) {
  if (outputs.empty()) throw InvalidArgument("elementwise_mean of nothing");
  std::vector<double> mean(outputs[0].size(), 0.0);
  for (const auto& o : outputs) {
    if (o.size() != mean.size()) throw ShapeError("elementwise_mean: ragged outputs");
    for (std::size_t i = 0; i < o.size(); ++i) mean[i] += o[i];
  }
  for (double& m : mean) m /= static_cast<double>(outputs.size());
  return mean;
}

std::vector<double> elementwise_variance(std::span<const std::vector<double>> outputs) {
  if (outputs.size() < 2) throw InvalidArgument("variance needs at least two outputs");
  const std::vector<double>& ref = outputs[0];
  const double k = static_cast<double>(outputs.size());
  // Two passes over deviations from the first output, so identical outputs give exactly 0.
  std::vector<double> shift(ref.size(), 0.0);
  for (const auto& o : outputs) {
    if (o.size() != ref.size()) throw ShapeError("elementwise_variance: ragged outputs");
    for (std::size_t i = 0; i < o.size(); ++i) shift[i] += o[i] - ref[i];
  }
  for (double& m : shift) m /= k;
  std::vector<double> var(ref.size(), 0.0);
  for (const auto& o : outputs)
    for (std::size_t i = 0; i < o.size(); ++i) {
      const double d = (o[i] - ref[i]) - shift[i];
      var[i] += d * d;
    }
  for (double& v : var) v /= k - 1.0;
  return var;
}

VarianceResult perturbation_variance(const Reconstructor& phi, std::span<const double> x,
                                     double noise_fraction, std::size_t k,
                                     std::uint64_t base_seed) {
  if (k < 2) throw InvalidArgument("perturbation_variance needs k >= 2");
  require_dim(phi, x);
  std::vector<std::vector<double>> inputs;
  inputs.reserve(k);
  for (std::size_t i = 0; i < k; ++i) inputs.push_back(perturb(x, noise_fraction, base_seed + i));
  const auto outs = phi(inputs);
  VarianceResult r;
  r.map = {elementwise_variance(outs), MapMethod::PerturbationVariance};
  r.score = {mean_of(r.map.pixels), k};
  return r;
}

VarianceResult perturbation_variance(const ReconModel& model, std::span<const double> x,
                                     double noise_fraction, std::size_t k,
                                     std::uint64_t base_seed) {
  return perturbation_variance(Reconstructor::from_model(model), x, noise_fraction, k, base_seed);
}

std::uint64_t mc_pass_seed(std::uint64_t seed, std::size_t stream, std::size_t iteration) {
  return mix_seed(mix_seed(seed, 1000 + stream), iteration);
}

BaselineResult mc_dropout_scores(const ReconModel& model, std::span<const double> x,
                                 double noise_fraction, std::size_t iterations,
                                 std::uint64_t seed) {
  if (model.spec.kind != ArchKind::AutomapDropout)
    throw InvalidArgument("mc_dropout_scores needs an automap-dropout model");
  if (iterations < 2) throw InvalidArgument("mc_dropout_scores needs iterations >= 2");
  if (x.size() != model.spec.input_dim()) throw ShapeError("input width does not match the model");
  const std::vector<double> noisy = perturb(x, noise_fraction, seed);

  std::vector<std::uint64_t> clean_seeds(iterations);
  std::vector<std::uint64_t> noisy_seeds(iterations);
  for (std::size_t i = 0; i < iterations; ++i) {
    clean_seeds[i] = mc_pass_seed(seed, 0, i);
    noisy_seeds[i] = mc_pass_seed(seed, 1, i);
  }
  BaselineResult r;
  r.clean_outputs = forward_repeated(model, x, clean_seeds);
  const auto noisy_outputs = forward_repeated(model, noisy, noisy_seeds);
  r.mean_clean = elementwise_mean(r.clean_outputs);
  r.mean_noisy = elementwise_mean(noisy_outputs);
  r.lipschitz = lipschitz_ratio(x, noisy, r.mean_clean, r.mean_noisy);
  r.lipschitz.noise_fraction = noise_fraction;
  r.lipschitz_map = {abs_diff(r.mean_noisy, r.mean_clean), MapMethod::LipschitzDiff};
  r.variance_map = {elementwise_variance(r.clean_outputs), MapMethod::McVariance};
  r.variance = {mean_of(r.variance_map.pixels), iterations};
  return r;
}

BaselineResult ensemble_scores(std::span<const ReconModel> models, std::span<const double> x,
                               double noise_fraction, std::uint64_t seed) {
  if (models.size() < 2) throw InvalidArgument("ensemble_scores needs at least two models");
  for (const auto& m : models)
    if (!(m.spec == models[0].spec)) throw InvalidArgument("ensemble members have different specs");
  if (x.size() != models[0].spec.input_dim()) throw ShapeError("input width does not match the models");

  std::vector<std::vector<double>> inputs;
  inputs.emplace_back(x.begin(), x.end());
  inputs.push_back(perturb(x, noise_fraction, seed));

  BaselineResult r;
  std::vector<std::vector<double>> noisy_outputs;
  for (const auto& m : models) {
    auto outs = forward_batch(m, inputs);
    r.clean_outputs.push_back(std::move(outs[0]));
    noisy_outputs.push_back(std::move(outs[1]));
  }
  r.mean_clean = elementwise_mean(r.clean_outputs);
  r.mean_noisy = elementwise_mean(noisy_outputs);
  r.lipschitz = lipschitz_ratio(inputs[0], inputs[1], r.mean_clean, r.mean_noisy);
  r.lipschitz.noise_fraction = noise_fraction;
  r.lipschitz_map = {abs_diff(r.mean_noisy, r.mean_clean), MapMethod::LipschitzDiff};
  r.variance_map = {elementwise_variance(r.clean_outputs), MapMethod::EnsembleVariance};
  r.variance = {mean_of(r.variance_map.pixels), models.size()};
  return r;
}

LipschitzResult lipschitz_pairwise(const Reconstructor& phi, std::span<const double> x_lo,
                                   std::span<const double> x_hi) {
  require_dim(phi, x_lo);
  require_dim(phi, x_hi);
  std::vector<std::vector<double>> inputs;
  inputs.emplace_back(x_lo.begin(), x_lo.end());
  inputs.emplace_back(x_hi.begin(), x_hi.end());
  const auto outs = phi(inputs);
  LipschitzResult r;
  r.score = lipschitz_ratio(x_lo, x_hi, outs[0], outs[1]);
  r.map = {abs_diff(outs[1], outs[0]), MapMethod::LipschitzDiff};
  return r;
}

LipschitzResult lipschitz_pairwise(const ReconModel& model, std::span<const double> x_lo,
                                   std::span<const double> x_hi) {
  return lipschitz_pairwise(Reconstructor::from_model(model), x_lo, x_hi);
}

}  // namespace lipgate
