#include "layers.hpp"
#include "lipgate/error.hpp"
#include "lipgate/models.hpp"

#include <cmath>
#include <optional>
#include <random>

namespace lipgate {

namespace {

using layers::ConvShape;
using layers::Map2;
using ColMat = Eigen::MatrixXd;
using RowView = Eigen::Map<const Map2>;
using RowGrad = Eigen::Map<Map2>;

constexpr std::size_t kChunk = 64;      // samples per fully connected GEMM
constexpr std::size_t kConvChunk = 1;  // larger im2col blocks fall out of cache and run slower

// Tensor slots in ArchSpec::layout() order.
namespace am {
constexpr std::size_t fc1_w = 0, fc1_b = 1, fc2_w = 2, fc2_b = 3, conv1_w = 4, conv1_b = 5,
                      conv2_w = 6, conv2_b = 7, deconv_w = 8, deconv_b = 9;
}
namespace un {
constexpr std::size_t enc1_w = 0, enc1_b = 1, enc2_w = 2, enc2_b = 3, enc3_w = 4, enc3_b = 5,
                      dec2_w = 6, dec2_b = 7, dec1_w = 8, dec1_b = 9, deconv_w = 10,
                      deconv_b = 11;
}

std::span<const double> cw(const ReconModel& m, std::size_t i) { return m.weights[i].data; }
std::span<double> gw(std::vector<Tensor>& g, std::size_t i) { return g[i].data; }

void check_finite(const Map2& a, const char* layer) {
  if (!a.allFinite())
    throw NonFiniteLossError(layer, std::string("non-finite activation in layer '") + layer + "'");
}
void check_finite(const ColMat& a, const char* layer) {
  if (!a.allFinite())
    throw NonFiniteLossError(layer, std::string("non-finite activation in layer '") + layer + "'");
}

std::vector<double> dropout_mask(std::size_t count, double p, std::uint64_t seed) {
  std::vector<double> mask(count);
  std::mt19937_64 rng(seed);
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& v : mask) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = u < p ? 0.0 : keep_scale;
  }
  return mask;
}

bool dropout_active(const ReconModel& m, bool stochastic) {
  return stochastic && m.spec.kind == ArchKind::AutomapDropout && m.spec.dropout_p > 0.0;
}

Map2 relu(const Map2& z) { return z.cwiseMax(0.0); }
Map2 relu_mask(const Map2& a) { return (a.array() > 0.0).cast<double>().matrix(); }

// ---------------------------------------------------------------------------
// AUTOMAP

struct ConvStackCache {
  Map2 m0;    // fc2 output planes, 1 x B*hw
  Map2 a3;    // tanh(conv1)
  std::vector<double> mask;  // empty when dropout is off
  Map2 d3;    // a3 after dropout
  Map2 a4;    // relu(conv2)
  Map2 out;   // 1 x B*hw
};

ConvShape conv1_shape(const ArchSpec& s, std::size_t b) {
  return {1, s.conv_filters, s.n, s.n, s.conv_kernel, b};
}
ConvShape conv2_shape(const ArchSpec& s, std::size_t b) {
  return {s.conv_filters, s.conv_filters, s.n, s.n, s.conv_kernel, b};
}
ConvShape deconv_shape(const ArchSpec& s, std::size_t b) {
  return {s.conv_filters, 1, s.n, s.n, s.final_kernel, b};
}

ColMat gather_inputs(const ArchSpec& spec, std::span<const std::span<const double>> xs) {
  ColMat x(static_cast<long>(spec.input_dim()), static_cast<long>(xs.size()));
  for (std::size_t j = 0; j < xs.size(); ++j) {
    if (xs[j].size() != spec.input_dim())
      throw ShapeError("input width " + std::to_string(xs[j].size()) + " does not match model input " +
                       std::to_string(spec.input_dim()));
    x.col(static_cast<long>(j)) =
        Eigen::Map<const Eigen::VectorXd>(xs[j].data(), static_cast<long>(xs[j].size())) *
        spec.input_scale;
  }
  return x;
}

// 1 x B*hw row holding B consecutive planes.
Map2 gather_planes(std::span<const std::span<const double>> planes, std::size_t hw) {
  Map2 row(1, static_cast<long>(planes.size() * hw));
  for (std::size_t j = 0; j < planes.size(); ++j) {
    if (planes[j].size() != hw)
      throw ShapeError("width " + std::to_string(planes[j].size()) + " does not match " +
                       std::to_string(hw) + " pixels");
    std::copy(planes[j].begin(), planes[j].end(), row.data() + j * hw);
  }
  return row;
}

struct FcCache {
  ColMat x;   // scaled input
  ColMat a1;  // tanh(fc1)
  ColMat z2;  // fc2 output
};

FcCache fc_forward(const ReconModel& m, ColMat x) {
  const ArchSpec& s = m.spec;
  const long in = static_cast<long>(s.input_dim());
  const long h = static_cast<long>(s.fc1_width);
  const long out = static_cast<long>(s.n * s.n);
  RowView w1(cw(m, am::fc1_w).data(), h, in);
  RowView w2(cw(m, am::fc2_w).data(), out, h);
  Eigen::Map<const Eigen::VectorXd> b1(cw(m, am::fc1_b).data(), h);
  Eigen::Map<const Eigen::VectorXd> b2(cw(m, am::fc2_b).data(), out);
  FcCache c;
  c.x = std::move(x);
  c.a1.noalias() = w1 * c.x;
  c.a1.colwise() += b1;
  c.a1 = c.a1.array().tanh().matrix();
  check_finite(c.a1, "fc1");
  c.z2.noalias() = w2 * c.a1;
  c.z2.colwise() += b2;
  check_finite(c.z2, "fc2");
  return c;
}

// conv1 -> tanh on B planes starting at z2, the part ahead of the dropout.
void conv_prefix(const ReconModel& m, const double* z2, std::size_t b, ConvStackCache& c) {
  const ArchSpec& s = m.spec;
  c.m0 = Eigen::Map<const Map2>(z2, 1, static_cast<long>(b * s.n * s.n));
  c.a3 = layers::conv_forward(c.m0, conv1_shape(s, b), cw(m, am::conv1_w), cw(m, am::conv1_b))
             .array()
             .tanh()
             .matrix();
  check_finite(c.a3, "conv1");
}

// dropout -> conv2 -> relu -> transposed conv. Sample j's mask comes from
// mask_seeds[j] and is laid out exactly as for a single-sample pass.
void conv_suffix(const ReconModel& m, const Map2& a3, std::span<const std::uint64_t> mask_seeds,
                 ConvStackCache& c) {
  const ArchSpec& s = m.spec;
  const std::size_t hw = s.n * s.n;
  const std::size_t b = static_cast<std::size_t>(a3.cols()) / hw;
  const std::size_t f = s.conv_filters;
  if (!mask_seeds.empty()) {
    c.mask.assign(f * b * hw, 0.0);
    for (std::size_t j = 0; j < b; ++j) {
      const auto mj = dropout_mask(f * hw, s.dropout_p, mask_seeds[j]);
      for (std::size_t ch = 0; ch < f; ++ch)
        std::copy_n(mj.data() + ch * hw, hw, c.mask.data() + ch * b * hw + j * hw);
    }
    c.d3 = a3.cwiseProduct(Eigen::Map<const Map2>(c.mask.data(), a3.rows(), a3.cols()));
  } else {
    c.mask.clear();
    c.d3 = a3;
  }
  c.a4 = relu(layers::conv_forward(c.d3, conv2_shape(s, b), cw(m, am::conv2_w), cw(m, am::conv2_b)));
  check_finite(c.a4, "conv2");
  c.out = layers::conv_transpose_forward(c.a4, deconv_shape(s, b), cw(m, am::deconv_w),
                                         cw(m, am::deconv_b));
  check_finite(c.out, "deconv");
}

std::vector<std::uint64_t> chunk_seeds(bool active, std::uint64_t seed, std::size_t first,
                                       std::size_t count) {
  std::vector<std::uint64_t> seeds;
  if (!active) return seeds;
  for (std::size_t j = 0; j < count; ++j) seeds.push_back(mix_seed(seed, first + j));
  return seeds;
}

void split_planes(const Map2& row, std::size_t hw, std::vector<std::vector<double>>& outs) {
  const std::size_t b = static_cast<std::size_t>(row.size()) / hw;
  for (std::size_t j = 0; j < b; ++j)
    outs.emplace_back(row.data() + j * hw, row.data() + (j + 1) * hw);
}

// ---------------------------------------------------------------------------
// Residual U-Net

struct UnetCache {
  Map2 x, e1, p1, e2, p2, e3, s2, d2, s1, d1, out;
};

// raw: 1 x B*hw row of unscaled inputs.
void unet_forward(const ReconModel& m, const Map2& raw, UnetCache& c) {
  const ArchSpec& s = m.spec;
  const std::size_t n = s.n;
  const std::size_t f = s.conv_filters;
  const std::size_t k = s.conv_kernel;
  const std::size_t b = static_cast<std::size_t>(raw.cols()) / (n * n);
  c.x = raw * s.input_scale;
  c.e1 = relu(layers::conv_forward(c.x, {1, f, n, n, k, b}, cw(m, un::enc1_w), cw(m, un::enc1_b)));
  check_finite(c.e1, "enc1");
  c.p1 = layers::avg_pool2(c.e1, b * n, n);
  c.e2 = relu(layers::conv_forward(c.p1, {f, f, n / 2, n / 2, k, b}, cw(m, un::enc2_w),
                                   cw(m, un::enc2_b)));
  check_finite(c.e2, "enc2");
  c.p2 = layers::avg_pool2(c.e2, b * n / 2, n / 2);
  c.e3 = relu(layers::conv_forward(c.p2, {f, f, n / 4, n / 4, k, b}, cw(m, un::enc3_w),
                                   cw(m, un::enc3_b)));
  check_finite(c.e3, "enc3");
  c.s2 = layers::upsample2(c.e3, b * n / 4, n / 4) + c.e2;
  c.d2 = relu(layers::conv_forward(c.s2, {f, f, n / 2, n / 2, k, b}, cw(m, un::dec2_w),
                                   cw(m, un::dec2_b)));
  check_finite(c.d2, "dec2");
  c.s1 = layers::upsample2(c.d2, b * n / 2, n / 2) + c.e1;
  c.d1 = relu(layers::conv_forward(c.s1, {f, f, n, n, k, b}, cw(m, un::dec1_w), cw(m, un::dec1_b)));
  check_finite(c.d1, "dec1");
  c.out = layers::conv_transpose_forward(c.d1, {f, 1, n, n, s.final_kernel, b},
                                         cw(m, un::deconv_w), cw(m, un::deconv_b)) +
          raw;
  check_finite(c.out, "deconv");
}

// Accumulates weight gradients for the batch held in c.
void unet_backward(const ReconModel& m, const UnetCache& c, const Map2& d_out, double l1_gamma,
                   std::vector<Tensor>& g) {
  const ArchSpec& s = m.spec;
  const std::size_t n = s.n;
  const std::size_t f = s.conv_filters;
  const std::size_t k = s.conv_kernel;
  const std::size_t b = static_cast<std::size_t>(d_out.cols()) / (n * n);

  Map2 d_d1;
  layers::conv_transpose_backward(c.d1, {f, 1, n, n, s.final_kernel, b}, cw(m, un::deconv_w),
                                  d_out, gw(g, un::deconv_w), gw(g, un::deconv_b), &d_d1);
  Map2 dz = d_d1.cwiseProduct(relu_mask(c.d1));
  Map2 d_s1;
  layers::conv_backward(c.s1, {f, f, n, n, k, b}, cw(m, un::dec1_w), dz, gw(g, un::dec1_w),
                        gw(g, un::dec1_b), &d_s1);
  Map2 d_e1 = d_s1;
  Map2 d_d2 = layers::upsample2_backward(d_s1, b * n / 2, n / 2);
  dz = d_d2.cwiseProduct(relu_mask(c.d2));
  Map2 d_s2;
  layers::conv_backward(c.s2, {f, f, n / 2, n / 2, k, b}, cw(m, un::dec2_w), dz,
                        gw(g, un::dec2_w), gw(g, un::dec2_b), &d_s2);
  Map2 d_e2 = d_s2;
  Map2 d_e3 = layers::upsample2_backward(d_s2, b * n / 4, n / 4);
  dz = d_e3.cwiseProduct(relu_mask(c.e3));
  Map2 d_p2;
  layers::conv_backward(c.p2, {f, f, n / 4, n / 4, k, b}, cw(m, un::enc3_w), dz,
                        gw(g, un::enc3_w), gw(g, un::enc3_b), &d_p2);
  d_e2 += layers::avg_pool2_backward(d_p2, b * n / 2, n / 2);
  const Map2 e2_active = relu_mask(c.e2);
  d_e2 += l1_gamma * e2_active;  // d|a|/da for a >= 0
  dz = d_e2.cwiseProduct(e2_active);
  Map2 d_p1;
  layers::conv_backward(c.p1, {f, f, n / 2, n / 2, k, b}, cw(m, un::enc2_w), dz,
                        gw(g, un::enc2_w), gw(g, un::enc2_b), &d_p1);
  d_e1 += layers::avg_pool2_backward(d_p1, b * n, n);
  dz = d_e1.cwiseProduct(relu_mask(c.e1));
  layers::conv_backward(c.x, {1, f, n, n, k, b}, cw(m, un::enc1_w), dz, gw(g, un::enc1_w),
                        gw(g, un::enc1_b), nullptr);
}

std::vector<Tensor> zero_grads(const ReconModel& m) {
  std::vector<Tensor> g;
  g.reserve(m.weights.size());
  for (const auto& t : m.weights) g.push_back({t.name, t.shape, std::vector<double>(t.size(), 0.0)});
  return g;
}

// Sum of squared penalized weights; adds 2 lambda w to their gradients when given.
double l2_pass(const ReconModel& m, double lambda, std::vector<Tensor>* grads) {
  const auto layout = m.spec.layout();
  double acc = 0.0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (!layout[i].penalized) continue;
    const auto& wd = m.weights[i].data;
    if (grads == nullptr) {
      for (double v : wd) acc += v * v;
      continue;
    }
    double* gd = (*grads)[i].data.data();
    for (std::size_t e = 0; e < wd.size(); ++e) {
      acc += wd[e] * wd[e];
      gd[e] += 2.0 * lambda * wd[e];
    }
  }
  return acc;
}

void check_target(const ArchSpec& s, std::span<const double> target) {
  if (target.size() != s.output_dim())
    throw ShapeError("target width " + std::to_string(target.size()) + " does not match model output " +
                     std::to_string(s.output_dim()));
}

LossAndGrad run_loss(const ReconModel& m, std::span<const Example> batch, const TrainConfig& cfg,
                     std::uint64_t dropout_seed, bool want_grads) {
  if (batch.empty()) throw InvalidArgument("loss_and_grad needs a non-empty batch");
  const ArchSpec& s = m.spec;
  const std::size_t hw = s.n * s.n;
  LossAndGrad res;
  if (want_grads) res.grads = zero_grads(m);
  double data_loss = 0.0;
  double l1_sum = 0.0;
  const bool use_dropout = dropout_active(m, true);

  std::vector<std::span<const double>> inputs, targets;
  for (const auto& ex : batch) {
    check_target(s, ex.target);
    inputs.push_back(ex.input);
    targets.push_back(ex.target);
  }

  if (s.is_automap()) {
    FcCache fc = fc_forward(m, gather_inputs(s, inputs));
    ColMat d_z2(static_cast<long>(hw), static_cast<long>(batch.size()));
    ConvStackCache c;
    for (std::size_t start = 0; start < batch.size(); start += kConvChunk) {
      const std::size_t b = std::min(kConvChunk, batch.size() - start);
      conv_prefix(m, fc.z2.col(static_cast<long>(start)).data(), b, c);
      conv_suffix(m, c.a3, chunk_seeds(use_dropout, dropout_seed, start, b), c);
      const Map2 diff = c.out - gather_planes(std::span(targets).subspan(start, b), hw);
      data_loss += diff.squaredNorm();
      l1_sum += c.a4.sum();  // a4 >= 0
      if (!want_grads) continue;

      auto& g = res.grads;
      Map2 d_a4;
      layers::conv_transpose_backward(c.a4, deconv_shape(s, b), cw(m, am::deconv_w), 2.0 * diff,
                                      gw(g, am::deconv_w), gw(g, am::deconv_b), &d_a4);
      const Map2 active = relu_mask(c.a4);
      d_a4 += cfg.l1_gamma * active;
      const Map2 d_z4 = d_a4.cwiseProduct(active);
      Map2 d_d3;
      layers::conv_backward(c.d3, conv2_shape(s, b), cw(m, am::conv2_w), d_z4,
                            gw(g, am::conv2_w), gw(g, am::conv2_b), &d_d3);
      if (!c.mask.empty())
        d_d3 = d_d3.cwiseProduct(Eigen::Map<const Map2>(c.mask.data(), d_d3.rows(), d_d3.cols()));
      const Map2 d_z3 = d_d3.cwiseProduct((1.0 - c.a3.array().square()).matrix());
      Map2 d_m0;
      layers::conv_backward(c.m0, conv1_shape(s, b), cw(m, am::conv1_w), d_z3, gw(g, am::conv1_w),
                            gw(g, am::conv1_b), &d_m0);
      d_z2.middleCols(static_cast<long>(start), static_cast<long>(b)) =
          Eigen::Map<const ColMat>(d_m0.data(), static_cast<long>(hw), static_cast<long>(b));
    }
    if (want_grads) {
      auto& g = res.grads;
      const long in = static_cast<long>(s.input_dim());
      const long h = static_cast<long>(s.fc1_width);
      const long out = static_cast<long>(hw);
      RowGrad(gw(g, am::fc2_w).data(), out, h).noalias() += d_z2 * fc.a1.transpose();
      Eigen::Map<Eigen::VectorXd>(gw(g, am::fc2_b).data(), out) += d_z2.rowwise().sum();
      RowView w2(cw(m, am::fc2_w).data(), out, h);
      ColMat d_z1 = w2.transpose() * d_z2;
      d_z1.array() *= 1.0 - fc.a1.array().square();
      RowGrad(gw(g, am::fc1_w).data(), h, in).noalias() += d_z1 * fc.x.transpose();
      Eigen::Map<Eigen::VectorXd>(gw(g, am::fc1_b).data(), h) += d_z1.rowwise().sum();
    }
  } else {
    UnetCache c;
    for (std::size_t start = 0; start < batch.size(); start += kConvChunk) {
      const std::size_t b = std::min(kConvChunk, batch.size() - start);
      unet_forward(m, gather_planes(std::span(inputs).subspan(start, b), hw), c);
      const Map2 diff = c.out - gather_planes(std::span(targets).subspan(start, b), hw);
      data_loss += diff.squaredNorm();
      l1_sum += c.e2.sum();
      if (want_grads) unet_backward(m, c, 2.0 * diff, cfg.l1_gamma, res.grads);
    }
  }

  LossReport& r = res.loss;
  r.data_loss = data_loss;
  r.l2_penalty = cfg.l2_lambda * l2_pass(m, cfg.l2_lambda, want_grads ? &res.grads : nullptr);
  r.l1_penalty = cfg.l1_gamma * l1_sum;
  r.total = r.data_loss + r.l2_penalty + r.l1_penalty;
  if (!std::isfinite(r.total)) throw NonFiniteLossError("loss", "non-finite total loss");
  return res;
}

}  // namespace

std::vector<double> dropout(std::span<const double> values, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p < 1.0)) throw InvalidArgument("dropout probability must lie in [0, 1)");
  std::vector<double> out(values.begin(), values.end());
  if (p == 0.0) return out;
  const auto mask = dropout_mask(values.size(), p, seed);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return out;
}

std::vector<std::vector<double>> forward_batch(const ReconModel& m,
                                               std::span<const std::vector<double>> xs,
                                               ForwardMode mode) {
  const ArchSpec& s = m.spec;
  const std::size_t hw = s.n * s.n;
  std::vector<std::vector<double>> outs;
  outs.reserve(xs.size());
  const bool use_dropout = dropout_active(m, mode.stochastic);
  std::vector<std::span<const double>> all(xs.begin(), xs.end());
  if (s.is_automap()) {
    ConvStackCache c;
    for (std::size_t start = 0; start < xs.size(); start += kChunk) {
      const std::size_t stop = std::min(xs.size(), start + kChunk);
      const FcCache fc = fc_forward(m, gather_inputs(s, std::span(all).subspan(start, stop - start)));
      for (std::size_t sub = start; sub < stop; sub += kConvChunk) {
        const std::size_t b = std::min(kConvChunk, stop - sub);
        conv_prefix(m, fc.z2.col(static_cast<long>(sub - start)).data(), b, c);
        conv_suffix(m, c.a3, chunk_seeds(use_dropout, mode.seed, sub, b), c);
        split_planes(c.out, hw, outs);
      }
    }
  } else {
    UnetCache c;
    for (std::size_t start = 0; start < xs.size(); start += kConvChunk) {
      const std::size_t b = std::min(kConvChunk, xs.size() - start);
      if (s.input_dim() != hw) throw ShapeError("unet input width mismatch");
      unet_forward(m, gather_planes(std::span(all).subspan(start, b), hw), c);
      split_planes(c.out, hw, outs);
    }
  }
  return outs;
}

Image forward(const ReconModel& m, std::span<const double> x, ForwardMode mode) {
  const ArchSpec& s = m.spec;
  if (x.size() != s.input_dim())
    throw ShapeError("input width " + std::to_string(x.size()) + " does not match model input " +
                     std::to_string(s.input_dim()));
  // forward_batch seeds sample j with mix_seed(seed, j); a lone sample uses the seed itself.
  if (dropout_active(m, mode.stochastic)) {
    const std::span<const double> in[] = {x};
    const FcCache fc = fc_forward(m, gather_inputs(s, in));
    ConvStackCache c;
    conv_prefix(m, fc.z2.col(0).data(), 1, c);
    const std::uint64_t seeds[] = {mode.seed};
    conv_suffix(m, c.a3, seeds, c);
    return Image(s.n, std::vector<double>(c.out.data(), c.out.data() + c.out.size()));
  }
  const std::vector<double> one[] = {std::vector<double>(x.begin(), x.end())};
  return Image(s.n, std::move(forward_batch(m, one)[0]));
}

std::vector<std::vector<double>> forward_repeated(const ReconModel& m, std::span<const double> x,
                                                  std::span<const std::uint64_t> seeds) {
  const ArchSpec& s = m.spec;
  const std::size_t hw = s.n * s.n;
  std::vector<std::vector<double>> outs;
  outs.reserve(seeds.size());
  if (!dropout_active(m, true)) {
    const Image once = forward(m, x);
    outs.assign(seeds.size(), once.pixels);
    return outs;
  }
  if (x.size() != s.input_dim())
    throw ShapeError("input width " + std::to_string(x.size()) + " does not match model input " +
                     std::to_string(s.input_dim()));
  const std::span<const double> one[] = {x};
  const FcCache fc = fc_forward(m, gather_inputs(s, one));
  ConvStackCache c;
  conv_prefix(m, fc.z2.col(0).data(), 1, c);
  const Map2 a3 = c.a3;
  for (std::size_t start = 0; start < seeds.size(); start += kConvChunk) {
    const std::size_t b = std::min(kConvChunk, seeds.size() - start);
    Map2 tiled(a3.rows(), static_cast<long>(b * hw));
    for (std::size_t j = 0; j < b; ++j) tiled.middleCols(static_cast<long>(j * hw), static_cast<long>(hw)) = a3;
    conv_suffix(m, tiled, seeds.subspan(start, b), c);
    split_planes(c.out, hw, outs);
  }
  return outs;
}

LossAndGrad loss_and_grad(const ReconModel& m, std::span<const Example> batch,
                          const TrainConfig& cfg, std::uint64_t dropout_seed) {
  return run_loss(m, batch, cfg, dropout_seed, true);
}

LossReport evaluate_loss(const ReconModel& m, std::span<const Example> batch,
                         const TrainConfig& cfg, std::uint64_t dropout_seed) {
  return run_loss(m, batch, cfg, dropout_seed, false).loss;
}

}  // namespace lipgate
