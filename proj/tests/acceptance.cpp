// Acceptance runner: exact oracle checks plus the scaled end-to-end pipeline
// (n = 32, 2000 training / 500 ID / 500 OOD samples). Prints one PASS/FAIL
// line per criterion and exits nonzero if any fails.

#include "lipgate/commands.hpp"
#include "lipgate/error.hpp"
#include "lipgate/log.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>

using namespace lipgate;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const auto t0 = std::chrono::steady_clock::now();

void progress(const std::string& msg) {
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "[%7.1fs] %s\n", s, msg.c_str());
}

// ---------------------------------------------------------------- exact checks

Outcome dft_round_trip() {
  double worst_linf = 0.0, worst_energy = 0.0, worst_naive = 0.0;
  for (std::size_t n : {8u, 16u, 32u}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Image img(n, oracle::normal(n * n, 100 * n + seed));
      const KSpace k = dft2(img);
      const Image back = idft2(k);
      double e_img = 0.0, e_k = 0.0;
      for (std::size_t i = 0; i < n * n; ++i) {
        worst_linf = std::max(worst_linf, std::abs(back.pixels[i] - img.pixels[i]));
        e_img += img.pixels[i] * img.pixels[i];
        e_k += k.re[i] * k.re[i] + k.im[i] * k.im[i];
      }
      const double nn = static_cast<double>(n * n);
      worst_energy = std::max(worst_energy, std::abs(e_k / nn - e_img) / e_img);
      if (n <= 16 && seed < 3) {
        const KSpace ref = oracle::naive_dft2(img);
        for (std::size_t i = 0; i < n * n; ++i)
          worst_naive = std::max({worst_naive, std::abs(ref.re[i] - k.re[i]), std::abs(ref.im[i] - k.im[i])});
      }
    }
  }
  return {worst_linf < 1e-9 && worst_energy < 1e-9 && worst_naive < 1e-9,
          fmt("round-trip Linf %.2e, Parseval rel %.2e, vs direct sum %.2e", worst_linf, worst_energy,
              worst_naive)};
}

ArchSpec tiny(ArchKind kind) {
  ArchSpec s = kind == ArchKind::UnetResidual     ? ArchSpec::unet_residual(8)
               : kind == ArchKind::AutomapDropout ? ArchSpec::automap_dropout(8)
                                                  : ArchSpec::automap(8);
  s.conv_filters = 3;
  s.conv_kernel = 3;
  s.final_kernel = 3;
  if (s.is_automap()) s.fc1_width = 12;
  return s;
}

// Same fixture as the unit test: random biases, pinned seed free of ReLU kinks.
ReconModel tiny_model(ArchKind kind, std::uint64_t seed) {
  ReconModel m = init_model(tiny(kind), seed);
  for (std::size_t i = 0; i < m.weights.size(); ++i)
    if (!m.spec.layout()[i].penalized) m.weights[i].data = oracle::uniform(m.weights[i].size(), seed + 100 + i, -0.2, 0.2);
  return m;
}

Outcome gradient_check() {
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
  for (ArchKind kind : {ArchKind::Automap, ArchKind::AutomapDropout, ArchKind::UnetResidual}) {
    const ReconModel m = tiny_model(kind, 1);
    std::vector<std::vector<double>> in, out;
    for (std::size_t i = 0; i < 3; ++i) {
      in.push_back(m.spec.is_automap() ? oracle::normal(m.spec.input_dim(), 10 + i, 4.0)
                                       : oracle::uniform(m.spec.input_dim(), 10 + i));
      out.push_back(oracle::uniform(m.spec.output_dim(), 1010 + i));
    }
    std::vector<Example> batch;
    for (std::size_t i = 0; i < 3; ++i) batch.push_back({in[i], out[i]});
    TrainConfig c = TrainConfig::defaults_for(kind);
    c.l2_lambda = 1e-2;
    c.l1_gamma = 1e-2;
    const oracle::GradCheck g = oracle::gradient_check(m, batch, c, 17);
    checked += g.checked;
    if (g.max_rel_error >= worst) {
      worst = g.max_rel_error;
      where = std::string(to_string(kind)) + " " + g.worst;
    }
  }
  return {worst < 1e-4, fmt("%zu entries over 3 architectures, max rel error %.2e (%s)", checked, worst,
                            where.c_str())};
}

Outcome lipschitz_identities() {
  const std::size_t dim = 24;
  double err = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = oracle::normal(dim, seed);
    for (double c : {1.0, 3.0, -2.5, 0.1}) {
      const Reconstructor phi = Reconstructor::from_function(dim, dim, [c](std::span<const double> v) {
        std::vector<double> y(v.begin(), v.end());
        for (double& e : y) e *= c;
        return y;
      });
      err = std::max(err, std::abs(local_lipschitz(phi, x, 0.05, seed).score.value - std::abs(c)));
    }
    const Reconstructor flat = Reconstructor::from_function(
        dim, dim, [](std::span<const double>) { return std::vector<double>(24, 0.7); });
    err = std::max(err, local_lipschitz(flat, x, 0.05, seed).score.value);
  }
  std::size_t violations = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const auto a = oracle::normal(dim * dim, 5000 + trial);
    double norm = 0.0;  // max absolute column sum
    for (std::size_t col = 0; col < dim; ++col) {
      double s = 0.0;
      for (std::size_t row = 0; row < dim; ++row) s += std::abs(a[row * dim + col]);
      norm = std::max(norm, s);
    }
    const Reconstructor phi = Reconstructor::from_function(dim, dim, [&a](std::span<const double> v) {
      std::vector<double> y(24, 0.0);
      for (std::size_t r = 0; r < 24; ++r)
        for (std::size_t col = 0; col < 24; ++col) y[r] += a[r * 24 + col] * v[col];
      return y;
    });
    if (local_lipschitz(phi, oracle::normal(dim, trial), 0.05, trial).score.value > norm * (1 + 1e-12))
      ++violations;
  }
  return {err < 1e-9 && violations == 0,
          fmt("identity/constant/scaling max error %.2e; %zu of 100 linear maps above the L1 norm", err,
              violations)};
}

std::vector<double> tie_heavy(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, 5);
  std::vector<double> v(n);
  for (double& x : v) x = 0.5 * d(rng);
  return v;
}

Outcome rank_statistics() {
  double rho_err = 0.0, auc_err = 0.0;
  std::size_t skipped = 0;
  for (std::uint64_t f = 0; f < 1000; ++f) {
    const bool ties = f % 2 == 0;
    const std::size_t n = 3 + f % 60;
    const auto x = ties ? tie_heavy(n, f) : oracle::uniform(n, f);
    const auto y = ties ? tie_heavy(n, f + 7777) : oracle::normal(n, f + 7777);
    try {
      rho_err = std::max(rho_err, std::abs(spearman(x, y) - oracle::brute_spearman(x, y)));
    } catch (const UndefinedCorrelationError&) {
      ++skipped;  // constant side; the oracle is undefined too
    }
    const std::size_t ni = 1 + f % 37, no = 1 + (f * 7) % 41;
    const auto id = ties ? tie_heavy(ni, f) : oracle::uniform(ni, f);
    const auto ood = ties ? tie_heavy(no, f + 99) : oracle::uniform(no, f + 99, 0.2, 1.2);
    auc_err = std::max(auc_err, std::abs(roc_auc(id, ood).auc - oracle::brute_auc(id, ood)));
  }
  const double fixed = spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4});
  return {rho_err < 1e-12 && auc_err < 1e-12 && fixed == 0.8 && skipped < 50,
          fmt("Spearman max error %.2e, AUC max error %.2e, fixture rho = %.17g", rho_err, auc_err, fixed)};
}

Outcome referral_properties() {
  std::size_t increases = 0, mismatches = 0;
  for (std::uint64_t f = 0; f < 1000; ++f) {
    const std::size_t n = 1 + f % 200;
    const auto lip = f % 2 ? tie_heavy(n, f) : oracle::uniform(n, f);
    const auto err = oracle::uniform(n, f + 1, 0.0, 0.1);
    std::vector<EvalRecord> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = {i, Label::Id, err[i], lip[i], 0.0};
    const ReferralCurve c = referral_curve(r);
    for (std::size_t j = 1; j < c.mean_lip.size(); ++j)
      if (c.mean_lip[j] > c.mean_lip[j - 1]) ++increases;
    const double limit = oracle::uniform(1, f + 2, 0.0, 0.06)[0];
    const auto scan = oracle::scan_threshold(r, kDefaultReferralSteps, limit);
    try {
      const GateThreshold t = select_threshold(c, limit);
      if (!scan.feasible || t.gamma != scan.gamma || t.referred != scan.referred || t.fraction != scan.fraction)
        ++mismatches;
    } catch (const InfeasibleThresholdError&) {
      if (scan.feasible) ++mismatches;
    }
  }
  return {increases == 0 && mismatches == 0,
          fmt("1000 record sets: %zu mean_lip increases, %zu threshold mismatches", increases, mismatches)};
}

Outcome rmsprop_fixture() {
  std::vector<Tensor> w{{"w", {1}, {1.0}}};
  RmsPropState st = RmsPropState::zeros_like(w);
  TrainConfig c;
  c.learning_rate = 0.1;
  c.rms_decay = 0.9;
  rmsprop_step(w, {{"w", {1}, {2.0}}}, st, c);
  const double hand = 1.0 - 0.1 * 2.0 / std::sqrt(0.4 + 1e-8);
  double err = std::abs(w[0].data[0] - hand);

  std::vector<Tensor> w2{{"w", {1}, {0.3}}};
  RmsPropState st2 = RmsPropState::zeros_like(w2);
  const std::vector<double> gs{0.5, -1.0, 2.0, 0.25};
  for (double g : gs) rmsprop_step(w2, {{"w", {1}, {g}}}, st2, c);
  err = std::max(err, std::abs(w2[0].data[0] - oracle::rmsprop_scalar(0.3, 0.0, gs, 0.1, 0.9, 1e-8)));

  std::vector<Tensor> w3{{"w", {3}, {0.5, -2.0, 7.0}}};
  const std::vector<Tensor> before = w3;
  RmsPropState st3 = RmsPropState::zeros_like(w3);
  for (int i = 0; i < 5; ++i) rmsprop_step(w3, {{"w", {3}, {0.0, 0.0, 0.0}}}, st3, c);
  const bool fixed = w3 == before;
  return {err < 1e-9 && std::abs(w[0].data[0] - 0.683772) < 1e-6 && fixed,
          fmt("w' = %.9f, max error vs hand/recurrence %.2e, zero gradient fixed point %s", w[0].data[0], err,
              fixed ? "yes" : "no")};
}

Outcome format_round_trips() {
  std::vector<std::string> failed;
  auto check = [&failed](bool ok, const char* what) {
    if (!ok) failed.push_back(what);
  };

  RunConfig cfg = RunConfig::defaults(Task::Automap, 8);
  cfg.arch = tiny(ArchKind::AutomapDropout);
  cfg.train = TrainConfig::defaults_for(cfg.arch.kind);
  override_seed(cfg, 77);
  const Checkpoint ck{cfg, tiny_model(ArchKind::AutomapDropout, 77)};
  const Bytes cb = encode_checkpoint(ck);
  const Checkpoint back = decode_checkpoint(cb);
  check(back.config == cfg && back.model.weights == ck.model.weights && encode_checkpoint(back) == cb,
        "checkpoint");
  check(parse_config(cfg.to_ini()) == cfg, "config");

  for (Task t : {Task::Automap, Task::Denoise, Task::Ct}) {
    RunConfig dc = RunConfig::defaults(t, 16);
    dc.data.test_id_count = 3;
    dc.data.train_count = 3;
    dc.data.augment = t == Task::Denoise;
    Dataset ds = make_train_dataset(dc);
    const Bytes db = encode_dataset(ds);
    check(decode_dataset(db) == ds && encode_dataset(decode_dataset(db)) == db, "dataset");
  }

  const Tensor tensor{"input", {2, 3}, oracle::normal(6, 3)};
  check(decode_tensor(encode_tensor(tensor)) == tensor, "tensor");
  const fs::path tmp = fs::temp_directory_path() / "lipgate_acceptance_image.lipt";
  const Image img(8, oracle::normal(64, 4));
  save_image(tmp.string(), img);
  check(load_image(tmp.string()) == img, "image");
  fs::remove(tmp);

  std::vector<EvalRecord> recs;
  const auto vals = oracle::normal(60, 5);
  for (std::size_t i = 0; i < 20; ++i)
    recs.push_back({i * 977, i % 3 ? Label::Id : Label::Ood, std::abs(vals[i]), vals[20 + i] * 1e-300,
                    std::exp(vals[40 + i] * 50)});
  check(records_from_csv(records_to_csv(recs)) == recs, "records csv");

  std::size_t undetected = 0;
  for (std::size_t i = 0; i < cb.size(); ++i) {
    Bytes bad = cb;
    bad[i] ^= 0x5a;
    try {
      decode_checkpoint(bad);
      ++undetected;
    } catch (const CrcMismatchError&) {
    } catch (const Error&) {
      ++undetected;
    }
  }
  bool truncated_rejected = true;
  try {
    decode_checkpoint(Bytes(cb.begin(), cb.end() - 5));
    truncated_rejected = false;
  } catch (const FormatError&) {
  }
  check(undetected == 0 && truncated_rejected, "checkpoint corruption");

  std::string failures;
  for (const auto& f : failed) failures += " " + f;
  return {failed.empty(), fmt("checkpoint/config/dataset/tensor/image/records exact; %zu single-byte "
                              "corruptions of a %zu-byte checkpoint all raise CRC mismatch%s%s",
                              cb.size(), cb.size(), failed.empty() ? "" : "; FAILED:", failures.c_str())};
}

// ------------------------------------------------------------------- pipeline

struct Settings {
  std::string workdir;
  bool reuse = false;
  std::uint64_t seed = 1;
  std::size_t automap_epochs = 15;
  double automap_lr = 1e-4;
  double automap_momentum = 0.9;
  std::size_t automap_batch = 10;
  std::size_t unet_epochs = 5;
  double unet_lr = 2e-4;
  std::size_t unet_batch = 20;
};

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::vector<double> column(std::span<const EvalRecord> r, double EvalRecord::*field) {
  std::vector<double> v;
  for (const auto& e : r) v.push_back(e.*field);
  return v;
}

double rank_corr(std::span<const EvalRecord> r) {
  return spearman(column(r, &EvalRecord::lipschitz), column(r, &EvalRecord::mae));
}

class Pipeline {
 public:
  explicit Pipeline(const Settings& s) : s_(s) { fs::create_directories(s_.workdir); }

  RunConfig config(Task task, const std::string& name) const {
    RunConfig c = RunConfig::defaults(task, 32);
    override_seed(c, s_.seed);
    const fs::path dir = fs::path(s_.workdir) / name;
    fs::create_directories(dir);
    c.paths.data_dir = (fs::path(s_.workdir) / (task == Task::Automap ? "automap" : name) / "data").string();
    c.paths.checkpoint = (dir / "model.lipg").string();
    c.paths.loss_csv = (dir / "loss.csv").string();
    c.paths.records_csv = (dir / "records.csv").string();
    if (task == Task::Automap) {
      c.train.epochs = s_.automap_epochs;
      c.train.learning_rate = s_.automap_lr;
      c.train.momentum = s_.automap_momentum;
      c.train.batch_size = s_.automap_batch;
    } else {
      c.train.epochs = s_.unet_epochs;
      c.train.learning_rate = s_.unet_lr;
      c.train.batch_size = s_.unet_batch;
    }
    return c;
  }

  void datagen(const RunConfig& c) {
    if (done_.count(c.paths.data_dir)) return;
    done_.insert(c.paths.data_dir);
    if (s_.reuse && fs::exists(test_ood_dataset_path(c))) return;
    progress("datagen " + std::string(to_string(c.task)) + " -> " + c.paths.data_dir);
    cmd_datagen(c);
  }

  std::string trained(const RunConfig& c) {
    datagen(c);
    if (done_.count(c.paths.checkpoint)) return c.paths.checkpoint;
    done_.insert(c.paths.checkpoint);
    if (s_.reuse && fs::exists(c.paths.checkpoint)) return c.paths.checkpoint;
    progress(fmt("train %s %s seed %llu: %zu epochs, lr %g, batch %zu", std::string(to_string(c.task)).c_str(),
                 std::string(to_string(c.arch.kind)).c_str(), static_cast<unsigned long long>(c.seed),
                 c.train.epochs, c.train.learning_rate, c.train.batch_size));
    cmd_train(c, train_dataset_path(c), [](const EpochStats& e) {
      progress(fmt("  epoch %zu loss %.6g (data %.6g)", e.epoch, e.mean_total_loss, e.mean_data_loss));
    });
    return c.paths.checkpoint;
  }

  std::vector<EvalRecord> records(const RunConfig& c, const std::vector<std::string>& ckpts,
                                  const std::string& dataset, EvalMethod method, const std::string& name) {
    if (auto it = cache_.find(name); it != cache_.end()) return it->second;
    const std::string out = (fs::path(s_.workdir) / (name + ".csv")).string();
    if (s_.reuse && fs::exists(out)) return cache_[name] = load_records(out);
    progress("eval " + name);
    return cache_[name] = cmd_eval(c, ckpts, dataset, method, out);
  }

  std::string path(const std::string& name) const { return (fs::path(s_.workdir) / name).string(); }

  const Settings& settings() const { return s_; }

 private:
  Settings s_;
  std::set<std::string> done_;
  std::map<std::string, std::vector<EvalRecord>> cache_;
};

RunConfig automap_at(const Pipeline& p, double noise_fraction) {
  RunConfig c = p.config(Task::Automap, "automap");
  c.uncertainty.noise_fraction = noise_fraction;
  return c;
}

std::vector<EvalRecord> automap_id(Pipeline& p, double noise_fraction) {
  const RunConfig c = automap_at(p, noise_fraction);
  return p.records(c, {p.trained(c)}, test_id_dataset_path(c), EvalMethod::Single,
                   fmt("automap_id_p%.2f", noise_fraction));
}

Outcome beats_inverse_dft(Pipeline& p) {
  RunConfig c = p.config(Task::Automap, "automap");
  const ReconModel model = load_checkpoint(p.trained(c)).model;
  c.data.test_noise_fraction = 0.01;
  const Dataset ds = make_test_dataset(c, PhantomFamily::IdEllipse);
  std::vector<double> net, base;
  for (const auto& s : ds.samples) {
    net.push_back(mae(forward(model, s.input.values), s.target));
    base.push_back(mae(idft2(KSpace::from_concat(ds.n, s.input.values)), s.target));
  }
  const double a = mean_of(net), b = mean_of(base);
  return {a < b, fmt("network MAE %.5f vs inverse DFT %.5f on %zu inputs with 1%% multiplicative noise", a, b,
                     ds.samples.size())};
}

Outcome correlation_trend(Pipeline& p) {
  const std::vector<double> levels{0.05, 0.10, 0.15, 0.20};
  std::vector<double> rho;
  for (double lvl : levels) rho.push_back(rank_corr(automap_id(p, lvl)));
  bool trend = true;
  for (std::size_t i = 1; i < rho.size(); ++i) trend = trend && rho[i] <= rho[i - 1] + 0.1;
  return {rho[0] > 0.5 && trend,
          fmt("Spearman at p = 0.05/0.10/0.15/0.20: %.4f %.4f %.4f %.4f", rho[0], rho[1], rho[2], rho[3])};
}

Outcome ood_detection(Pipeline& p) {
  const RunConfig c = automap_at(p, kDefaultNoiseFraction);
  const auto id = automap_id(p, kDefaultNoiseFraction);
  const auto ood = p.records(c, {p.trained(c)}, test_ood_dataset_path(c), EvalMethod::Single, "automap_ood_p0.05");
  const double var_auc = ood_curve(id, ood, ScoreColumn::Variance).auc;
  const double lip_auc = ood_curve(id, ood, ScoreColumn::Lipschitz).auc;
  return {var_auc > 0.80 && lip_auc > 0.70 && var_auc >= lip_auc - 0.05,
          fmt("variance AUC %.4f, Lipschitz AUC %.4f", var_auc, lip_auc)};
}

Outcome unet_correlation(Pipeline& p) {
  std::string detail;
  bool pass = true;
  for (Task t : {Task::Denoise, Task::Ct}) {
    const std::string name(to_string(t));
    const RunConfig c = p.config(t, name);
    const auto r = p.records(c, {p.trained(c)}, test_id_dataset_path(c), EvalMethod::Single, name + "_id");
    const double rho = rank_corr(r);
    pass = pass && rho > 0.4;
    detail += fmt("%s%s Spearman %.4f", detail.empty() ? "" : ", ", name.c_str(), rho);
  }
  return {pass, detail};
}

Outcome calibration_closure(Pipeline& p) {
  const RunConfig c = automap_at(p, kDefaultNoiseFraction);
  const auto recs = automap_id(p, kDefaultNoiseFraction);
  const std::string csv = p.path("automap_id_p0.05.csv");
  save_records(csv, recs);
  const double limit = quantile(column(recs, &EvalRecord::mae), 0.75);
  const Calibration cal = cmd_calibrate(csv, limit, p.path("referral.csv"));
  const double gamma = cal.threshold.gamma;

  const Dataset ds = load_dataset(test_id_dataset_path(c));
  const std::string input = p.path("gate_input.lipt");
  std::vector<double> accepted;
  std::size_t score_mismatch = 0;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    save_tensor(input, input_tensor(ds.samples[i]));
    GateOptions o;
    o.checkpoint = c.paths.checkpoint;
    o.input = input;
    o.gamma = gamma;
    o.seed = c.seed;
    o.sample_id = ds.samples[i].meta.phantom_seed;
    const GateVerdict v = cmd_gate(o);
    if (v.score.value != recs[i].lipschitz) ++score_mismatch;
    if (v.accept) accepted.push_back(mae(v.reconstruction, ds.samples[i].target));
  }
  const double m = mean_of(accepted);
  return {!accepted.empty() && m <= limit && score_mismatch == 0,
          fmt("limit %.5f, gamma %.5f (fraction %.2f); gate accepted %zu/%zu with mean MAE %.5f", limit, gamma,
              cal.threshold.fraction, accepted.size(), ds.samples.size(), m)};
}

Outcome baseline_parity(Pipeline& p) {
  RunConfig c = automap_at(p, kDefaultNoiseFraction);

  RunConfig dc = p.config(Task::Automap, "automap_dropout");
  dc.arch = ArchSpec::automap_dropout(32);
  const auto mc = p.records(dc, {p.trained(dc)}, test_id_dataset_path(dc), EvalMethod::Mc, "mc_id");

  std::vector<std::string> members{p.trained(c)};
  for (std::uint64_t i = 1; i < c.uncertainty.ensemble_size; ++i) {
    RunConfig mcfg = p.config(Task::Automap, fmt("ensemble_%llu", static_cast<unsigned long long>(i)));
    override_seed(mcfg, c.seed + i);
    members.push_back(p.trained(mcfg));
  }
  const auto ens = p.records(c, members, test_id_dataset_path(c), EvalMethod::Ensemble, "ensemble_id");

  const double rho_mc = rank_corr(mc), rho_ens = rank_corr(ens);
  return {mc.size() == 500 && ens.size() == 500 && rho_mc > 0.4 && rho_ens > 0.4,
          fmt("MC dropout (%zu passes) Spearman %.4f, %zu-model ensemble Spearman %.4f", dc.uncertainty.iterations,
              rho_mc, members.size(), rho_ens)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner"};
  Settings s;
  std::vector<int> only;
  app.add_option("--workdir", s.workdir, "Scratch directory for datasets, checkpoints and records")->required();
  app.add_flag("--reuse", s.reuse, "Reuse datasets, checkpoints and records already in the workdir");
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--seed", s.seed, "Run seed")->capture_default_str();
  app.add_option("--automap-epochs", s.automap_epochs)->capture_default_str();
  app.add_option("--automap-lr", s.automap_lr)->capture_default_str();
  app.add_option("--automap-momentum", s.automap_momentum)->capture_default_str();
  app.add_option("--automap-batch", s.automap_batch)->capture_default_str();
  app.add_option("--unet-epochs", s.unet_epochs)->capture_default_str();
  app.add_option("--unet-lr", s.unet_lr)->capture_default_str();
  app.add_option("--unet-batch", s.unet_batch)->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  set_quiet(true);

  Pipeline pipe(s);
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, dft_round_trip},
      {2, gradient_check},
      {3, lipschitz_identities},
      {4, rank_statistics},
      {5, referral_properties},
      {6, rmsprop_fixture},
      {7, format_round_trips},
      {8, [&] { return beats_inverse_dft(pipe); }},
      {9, [&] { return correlation_trend(pipe); }},
      {10, [&] { return ood_detection(pipe); }},
      {11, [&] { return unet_correlation(pipe); }},
      {12, [&] { return calibration_closure(pipe); }},
      {13, [&] { return baseline_parity(pipe); }},
  };

  int failures = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d: %s  %s  [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
