#include "lipgate/datagen.hpp"
#include "lipgate/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace lipgate {

namespace {

constexpr double kPi = std::numbers::pi;

struct Ellipse {
  double cx, cy, a, b, angle;

  // Normalized radius; <= 1 inside.
  double radius(double u, double v) const {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double du = u - cx;
    const double dv = v - cy;
    const double x = (du * c + dv * s) / a;
    const double y = (-du * s + dv * c) / b;
    return std::sqrt(x * x + y * y);
  }
};

// Pixel centre in [-1, 1] coordinates.
double coord(std::size_t i, std::size_t n) {
  return (static_cast<double>(i) + 0.5) / static_cast<double>(n) * 2.0 - 1.0;
}

Image brain_proxy(std::size_t n, std::mt19937_64& rng) {
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const Ellipse skull{uni(-0.04, 0.04), uni(-0.04, 0.04), uni(0.62, 0.72), uni(0.70, 0.80),
                      uni(-0.2, 0.2)};
  const double tissue = uni(0.12, 0.22);
  const double rim = uni(0.75, 0.9);

  struct Blob {
    Ellipse shape;
    double level, slope, dir;
  };
  const int blobs = std::uniform_int_distribution<int>(5, 9)(rng);
  std::vector<Blob> inner;
  for (int i = 0; i < blobs; ++i) {
    const double r = uni(0.0, 0.45);
    const double phi = uni(0.0, 2 * kPi);
    Blob b;
    b.shape = {skull.cx + r * skull.a * std::cos(phi), skull.cy + r * skull.b * std::sin(phi),
               uni(0.08, 0.30), uni(0.08, 0.30), uni(0.0, kPi)};
    b.level = uni(0.08, 0.35);
    b.slope = uni(-0.15, 0.15);
    b.dir = uni(0.0, 2 * kPi);
    inner.push_back(b);
  }

  Image img(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double v = -coord(r, n);
    for (std::size_t c = 0; c < n; ++c) {
      const double u = coord(c, n);
      const double rho = skull.radius(u, v);
      double val = 0.0;
      if (rho <= 1.0) {
        val = rho > 0.88 ? rim : tissue;
        if (rho <= 0.88) {
          for (const auto& b : inner) {
            if (b.shape.radius(u, v) > 1.0) continue;
            const double along = (u - b.shape.cx) * std::cos(b.dir) + (v - b.shape.cy) * std::sin(b.dir);
            val += b.level + b.slope * along / std::max(b.shape.a, b.shape.b);
          }
        }
      }
      img.at(r, c) = std::clamp(val, 0.0, 1.0);
    }
  }
  return img;
}

Image knee_proxy(std::size_t n, std::mt19937_64& rng) {
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const double freq = uni(2.0, 5.0);
  const double orient = uni(0.0, kPi);
  const double phase = uni(0.0, 2 * kPi);
  const double base = uni(0.3, 0.45);
  const double amp = uni(0.1, 0.2);

  struct Rect {
    double u0, u1, v0, v1, level;
  };
  const int count = std::uniform_int_distribution<int>(3, 6)(rng);
  std::vector<Rect> rects;
  for (int i = 0; i < count; ++i) {
    const double w = uni(0.3, 1.0);
    const double h = uni(0.3, 1.0);
    const double u0 = uni(-1.0, 1.0 - w);
    const double v0 = uni(-1.0, 1.0 - h);
    rects.push_back({u0, u0 + w, v0, v0 + h, uni(0.55, 0.95)});
  }

  Image img(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double v = -coord(r, n);
    for (std::size_t c = 0; c < n; ++c) {
      const double u = coord(c, n);
      const double t = u * std::cos(orient) + v * std::sin(orient);
      double val = base + amp * std::sin(kPi * freq * t + phase);
      for (const auto& rc : rects)
        if (u >= rc.u0 && u <= rc.u1 && v >= rc.v0 && v <= rc.v1) val = std::max(val, rc.level);
      img.at(r, c) = std::clamp(val, 0.0, 1.0);
    }
  }
  return img;
}

}  // namespace

std::string_view to_string(PhantomFamily f) {
  return f == PhantomFamily::IdEllipse ? "id-ellipse" : "ood-block";
}

std::string_view to_string(Task t) {
  switch (t) {
    case Task::Automap: return "automap";
    case Task::Denoise: return "denoise";
    case Task::Ct: return "ct";
  }
  return "?";
}

PhantomFamily parse_family(std::string_view text) {
  if (text == "id-ellipse" || text == "id") return PhantomFamily::IdEllipse;
  if (text == "ood-block" || text == "ood") return PhantomFamily::OodBlock;
  throw InvalidArgument("unknown phantom family '" + std::string(text) + "'");
}

Task parse_task(std::string_view text) {
  if (text == "automap") return Task::Automap;
  if (text == "denoise") return Task::Denoise;
  if (text == "ct") return Task::Ct;
  throw InvalidArgument("unknown task '" + std::string(text) + "'");
}

Encoding encoding_for(Task t) {
  switch (t) {
    case Task::Automap: return Encoding::KSpaceConcat;
    case Task::Denoise: return Encoding::ImageNoisy;
    case Task::Ct: return Encoding::ImageSparseCt;
  }
  return Encoding::KSpaceConcat;
}

Phantom make_phantom(PhantomFamily family, std::size_t n, std::uint64_t seed) {
  validate_side(n);
  std::mt19937_64 rng(mix_seed(seed, family == PhantomFamily::IdEllipse ? 11 : 13));
  Phantom ph;
  ph.family = family;
  ph.seed = seed;
  ph.image = family == PhantomFamily::IdEllipse ? brain_proxy(n, rng) : knee_proxy(n, rng);
  return ph;
}

Image augment_crop(const Image& img, std::size_t row_offset, std::size_t col_offset) {
  const std::size_t n = img.n;
  if (row_offset > n || col_offset > n) throw InvalidArgument("crop offset outside the tiling");
  auto reflect = [n](std::size_t i) { return i < n ? i : 2 * n - 1 - i; };
  Image out(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      out.at(r, c) = img.at(reflect(r + row_offset), reflect(c + col_offset));
  return out;
}

Image augment(const Image& img, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> off(0, img.n);
  const std::size_t row = off(rng);
  const std::size_t col = off(rng);
  return augment_crop(img, row, col);
}

SamplePair encode_automap_pair(const Phantom& ph, const NoiseSpec& train_noise) {
  const std::vector<double> clean = dft2(ph.image).concat();
  SamplePair p;
  p.input.values = apply_noise(clean, train_noise, std_dev(clean));
  p.input.encoding = Encoding::KSpaceConcat;
  p.input.n = ph.image.n;
  p.target = ph.image;
  p.meta = {ph.seed, train_noise.seed, Task::Automap, ph.family, false};
  return p;
}

SamplePair make_denoise_pair(const Phantom& ph, double noise_frac, std::uint64_t seed) {
  if (!(noise_frac >= 0.0)) throw InvalidArgument("noise_frac must be >= 0");
  const std::size_t n = ph.image.n;
  const std::vector<double> clean = dft2(ph.image).concat();
  const std::vector<double> noisy =
      apply_noise(clean, {noise_frac, NoiseKind::GaussianAdditive, seed}, std_dev(clean));
  SamplePair p;
  p.input.values = idft2(KSpace::from_concat(n, noisy)).pixels;
  p.input.encoding = Encoding::ImageNoisy;
  p.input.n = n;
  p.target = ph.image;
  p.meta = {ph.seed, seed, Task::Denoise, ph.family, false};
  return p;
}

SamplePair make_ct_pair(const Phantom& ph, const CtOptions& opts, std::uint64_t seed) {
  if (opts.factor == 0 || opts.full_views == 0 || opts.full_views % opts.factor != 0)
    throw InvalidArgument("view factor " + std::to_string(opts.factor) + " does not divide " +
                          std::to_string(opts.full_views) + " views");
  if (!(opts.noise_frac >= 0.0)) throw InvalidArgument("noise_frac must be >= 0");
  const Sinogram full = radon(ph.image, opts.full_views);
  Sinogram noisy = full;
  noisy.values = apply_noise(full.values, {opts.noise_frac, NoiseKind::GaussianAdditive, seed},
                             std_dev(full.values));
  SamplePair p;
  p.input.values = iradon_fbp(noisy.subsample(opts.factor)).pixels;
  p.input.encoding = Encoding::ImageSparseCt;
  p.input.n = ph.image.n;
  p.target = iradon_fbp(full);
  p.meta = {ph.seed, seed, Task::Ct, ph.family, false};
  return p;
}

SamplePair make_pair(Task task, const Phantom& ph, double noise_fraction, std::uint64_t seed,
                     const CtOptions& ct) {
  switch (task) {
    case Task::Automap:
      return encode_automap_pair(ph, {noise_fraction, NoiseKind::Multiplicative, seed});
    case Task::Denoise:
      return make_denoise_pair(ph, noise_fraction, seed);
    case Task::Ct: {
      CtOptions o = ct;
      o.noise_frac = noise_fraction;
      return make_ct_pair(ph, o, seed);
    }
  }
  throw InvalidArgument("unknown task");
}

std::uint64_t sample_noise_seed(std::uint64_t base_seed, std::size_t index) {
  return mix_seed(base_seed + index, 101);
}

std::vector<SamplePair> build_dataset(const DatasetSpec& spec) {
  if (spec.count == 0) throw InvalidArgument("dataset count must be >= 1");
  validate_side(spec.n);
  std::vector<SamplePair> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    const std::uint64_t phantom_seed = spec.base_seed + i;
    Phantom ph = make_phantom(spec.family, spec.n, phantom_seed);
    if (spec.augment) ph.image = augment(ph.image, mix_seed(phantom_seed, 202));
    SamplePair p = make_pair(spec.task, ph, spec.noise_fraction,
                             sample_noise_seed(spec.base_seed, i), spec.ct);
    p.meta.augmented = spec.augment;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace lipgate
