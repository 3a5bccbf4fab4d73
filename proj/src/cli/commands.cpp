#include "lipgate/commands.hpp"

#include "lipgate/error.hpp"

#include <cmath>
#include <filesystem>

namespace lipgate {

namespace {

std::string in_data_dir(const RunConfig& cfg, const char* file) {
  return (std::filesystem::path(cfg.paths.data_dir) / file).string();
}

CtOptions ct_options(const RunConfig& cfg, double noise) {
  return {cfg.data.ct_views, cfg.data.ct_factor, noise};
}

Dataset to_dataset(const DatasetSpec& spec) {
  Dataset ds;
  ds.task = spec.task;
  ds.family = spec.family;
  ds.n = spec.n;
  ds.samples = build_dataset(spec);
  return ds;
}

std::size_t input_width(Task task, std::size_t n) {
  return task == Task::Automap ? 2 * n * n : n * n;
}

void check_compatible(const Checkpoint& ckpt, const Dataset& ds) {
  if (ckpt.config.task != ds.task)
    throw InvalidArgument("checkpoint was trained for task '" + std::string(to_string(ckpt.config.task)) +
                          "' but the dataset holds '" + std::string(to_string(ds.task)) + "'");
  if (ckpt.model.spec.n != ds.n || ckpt.model.spec.input_dim() != input_width(ds.task, ds.n))
    throw ShapeError("checkpoint architecture does not match the dataset image size");
}

}  // namespace

std::string train_dataset_path(const RunConfig& cfg) { return in_data_dir(cfg, "train.lipd"); }
std::string test_id_dataset_path(const RunConfig& cfg) { return in_data_dir(cfg, "test_id.lipd"); }
std::string test_ood_dataset_path(const RunConfig& cfg) { return in_data_dir(cfg, "test_ood.lipd"); }

Dataset make_train_dataset(const RunConfig& cfg) {
  DatasetSpec spec;
  spec.task = cfg.task;
  spec.family = cfg.data.family;
  spec.count = cfg.data.train_count;
  spec.n = cfg.arch.n;
  spec.base_seed = cfg.seed;
  spec.augment = cfg.data.augment;
  spec.noise_fraction = cfg.data.noise_fraction;
  spec.ct = ct_options(cfg, cfg.data.noise_fraction);
  return to_dataset(spec);
}

Dataset make_test_dataset(const RunConfig& cfg, PhantomFamily family) {
  DatasetSpec spec;
  spec.task = cfg.task;
  spec.family = family;
  const bool id = family == PhantomFamily::IdEllipse;
  spec.count = id ? cfg.data.test_id_count : cfg.data.test_ood_count;
  spec.n = cfg.arch.n;
  spec.base_seed = cfg.seed + (id ? kIdTestSeedOffset : kOodTestSeedOffset);
  spec.augment = false;
  spec.noise_fraction = cfg.data.test_noise_fraction;
  spec.ct = ct_options(cfg, cfg.data.test_noise_fraction);
  return to_dataset(spec);
}

DatagenOutput cmd_datagen(const RunConfig& cfg) {
  cfg.validate();
  DatagenOutput out;
  if (cfg.data.train_count > 0) {
    save_dataset(train_dataset_path(cfg), make_train_dataset(cfg));
    out.paths.push_back(train_dataset_path(cfg));
  }
  if (cfg.data.test_id_count > 0) {
    save_dataset(test_id_dataset_path(cfg), make_test_dataset(cfg, PhantomFamily::IdEllipse));
    out.paths.push_back(test_id_dataset_path(cfg));
  }
  if (cfg.data.test_ood_count > 0) {
    save_dataset(test_ood_dataset_path(cfg), make_test_dataset(cfg, PhantomFamily::OodBlock));
    out.paths.push_back(test_ood_dataset_path(cfg));
  }
  return out;
}

TrainResult cmd_train(const RunConfig& cfg, const std::optional<std::string>& dataset_path,
                      const EpochCallback& on_epoch) {
  cfg.validate();
  const Dataset ds = load_dataset(dataset_path.value_or(train_dataset_path(cfg)));
  if (ds.task != cfg.task || ds.n != cfg.arch.n)
    throw ConfigError("training dataset does not match the configured task and image size");
  if (ds.samples.empty()) throw InvalidArgument("training dataset is empty");

  std::vector<Example> examples;
  examples.reserve(ds.samples.size());
  for (const auto& s : ds.samples) examples.push_back({s.input.values, s.target.pixels});

  TrainResult result = train(init_model(cfg.arch, cfg.seed), examples, cfg.train, on_epoch);
  save_checkpoint(cfg.paths.checkpoint, {cfg, result.model});
  save_text(cfg.paths.loss_csv, loss_history_to_csv(result.history));
  return result;
}

EvalMethod parse_eval_method(std::string_view text) {
  if (text == "single") return EvalMethod::Single;
  if (text == "mc") return EvalMethod::Mc;
  if (text == "ensemble") return EvalMethod::Ensemble;
  throw InvalidArgument("unknown eval method '" + std::string(text) + "'");
}

std::uint64_t sample_seed(std::uint64_t run_seed, std::uint64_t sample_id) {
  return mix_seed(mix_seed(run_seed, 303), sample_id);
}

std::uint64_t variance_seed(std::uint64_t run_seed, std::uint64_t sample_id) {
  return mix_seed(mix_seed(run_seed, 404), sample_id);
}

std::vector<EvalRecord> evaluate(const RunConfig& cfg, std::span<const Checkpoint> checkpoints,
                                 const Dataset& ds, EvalMethod method) {
  cfg.validate();
  if (checkpoints.empty()) throw InvalidArgument("eval needs at least one checkpoint");
  for (const auto& c : checkpoints) check_compatible(c, ds);
  const auto& unc = cfg.uncertainty;
  const double p = unc.noise_fraction;

  std::vector<ReconModel> models;
  for (const auto& c : checkpoints) models.push_back(c.model);
  switch (method) {
    case EvalMethod::Single:
    case EvalMethod::Mc:
      if (models.size() != 1) throw InvalidArgument("this eval method takes exactly one checkpoint");
      if (method == EvalMethod::Mc && models[0].spec.kind != ArchKind::AutomapDropout)
        throw InvalidArgument("mc evaluation needs an automap-dropout checkpoint");
      break;
    case EvalMethod::Ensemble:
      if (models.size() != unc.ensemble_size)
        throw InvalidArgument("ensemble evaluation takes " + std::to_string(unc.ensemble_size) +
                              " checkpoints, got " + std::to_string(models.size()));
      break;
  }

  const Label label = ds.family == PhantomFamily::IdEllipse ? Label::Id : Label::Ood;
  std::vector<EvalRecord> records;
  records.reserve(ds.samples.size());
  for (const auto& s : ds.samples) {
    EvalRecord r;
    r.sample_id = s.meta.phantom_seed;
    r.label = label;
    const std::uint64_t seed = sample_seed(cfg.seed, r.sample_id);
    const std::span<const double> x = s.input.values;

    if (method == EvalMethod::Mc) {
      const BaselineResult b = mc_dropout_scores(models[0], x, p, unc.iterations, seed);
      r.lipschitz = b.lipschitz.value;
      r.variance = b.variance.value;
      r.mae = mae(b.mean_clean, s.target.pixels);
    } else if (method == EvalMethod::Ensemble) {
      const BaselineResult b = ensemble_scores(models, x, p, seed);
      r.lipschitz = b.lipschitz.value;
      r.variance = b.variance.value;
      r.mae = mae(b.mean_clean, s.target.pixels);
    } else {
      const ReconModel& m = models[0];
      r.mae = mae(forward(m, x).pixels, s.target.pixels);
      r.variance = perturbation_variance(m, x, p, unc.k, variance_seed(cfg.seed, r.sample_id)).score.value;
      if (ds.task == Task::Automap) {
        r.lipschitz = local_lipschitz(m, x, p, seed).score.value;
      } else {
        if (s.meta.augmented) throw InvalidArgument("pairwise scoring needs unaugmented samples");
        const Phantom ph = make_phantom(ds.family, ds.n, s.meta.phantom_seed);
        const CtOptions ct = ct_options(cfg, 0.0);
        const SamplePair lo = make_pair(ds.task, ph, unc.pair_lo, mix_seed(seed, 1), ct);
        const SamplePair hi = make_pair(ds.task, ph, unc.pair_hi, mix_seed(seed, 2), ct);
        r.lipschitz = lipschitz_pairwise(m, lo.input.values, hi.input.values).score.value;
      }
    }
    records.push_back(r);
  }
  return records;
}

std::vector<EvalRecord> cmd_eval(const RunConfig& cfg, const std::vector<std::string>& checkpoints,
                                 const std::string& dataset_path, EvalMethod method,
                                 const std::string& out_csv) {
  cfg.validate();
  std::vector<Checkpoint> ckpts;
  for (const auto& path : checkpoints) ckpts.push_back(load_checkpoint(path));
  const Dataset ds = load_dataset(dataset_path);
  auto records = evaluate(cfg, ckpts, ds, method);
  save_records(out_csv, records);
  return records;
}

ScoreColumn parse_score_column(std::string_view text) {
  if (text == "lipschitz") return ScoreColumn::Lipschitz;
  if (text == "variance") return ScoreColumn::Variance;
  throw InvalidArgument("unknown score column '" + std::string(text) + "'");
}

RocCurve ood_curve(std::span<const EvalRecord> id, std::span<const EvalRecord> ood, ScoreColumn column) {
  if (id.empty() || ood.empty()) throw InvalidArgument("OOD evaluation needs non-empty ID and OOD records");
  auto scores = [column](std::span<const EvalRecord> rs) {
    std::vector<double> v;
    for (const auto& r : rs) v.push_back(column == ScoreColumn::Lipschitz ? r.lipschitz : r.variance);
    return v;
  };
  return roc_auc(scores(id), scores(ood));
}

RocCurve cmd_ood(const std::string& id_csv, const std::string& ood_csv, ScoreColumn column,
                 const std::string& roc_out) {
  const auto id = load_records(id_csv);
  const auto ood = load_records(ood_csv);
  RocCurve c = ood_curve(id, ood, column);
  if (!roc_out.empty()) save_text(roc_out, roc_to_csv(c));
  return c;
}

Calibration calibrate(std::span<const EvalRecord> records, double mae_limit, std::size_t steps) {
  Calibration c;
  c.curve = referral_curve(records, steps);
  c.threshold = select_threshold(c.curve, mae_limit);
  return c;
}

Calibration cmd_calibrate(const std::string& records_csv, double mae_limit,
                          const std::string& curve_out) {
  const auto records = load_records(records_csv);
  if (records.empty()) throw InvalidArgument("calibration needs at least one record");
  const ReferralCurve curve = referral_curve(records);
  if (!curve_out.empty()) save_text(curve_out, referral_to_csv(curve));
  return {select_threshold(curve, mae_limit), curve};
}

GateVerdict gate(const ReconModel& model, std::span<const double> input, double gamma,
                 double noise_fraction, std::uint64_t seed) {
  if (std::isnan(gamma)) throw InvalidArgument("gamma must not be NaN");
  if (input.size() != model.spec.input_dim())
    throw ShapeError("gate input has width " + std::to_string(input.size()) + ", model expects " +
                     std::to_string(model.spec.input_dim()));
  GateVerdict v;
  LipschitzResult lr = local_lipschitz(model, input, noise_fraction, seed);
  v.score = lr.score;
  v.map = std::move(lr.map);
  v.reconstruction = forward(model, input);
  v.accept = v.score.value < gamma;
  return v;
}

GateVerdict cmd_gate(const GateOptions& opts) {
  const Checkpoint ckpt = load_checkpoint(opts.checkpoint);
  const Tensor in = load_tensor(opts.input);
  const double p = opts.noise_fraction.value_or(ckpt.config.uncertainty.noise_fraction);
  GateVerdict v = gate(ckpt.model, in.data, opts.gamma, p, sample_seed(opts.seed, opts.sample_id));
  if (!opts.recon_out.empty()) save_image(opts.recon_out, v.reconstruction, "reconstruction");
  if (!opts.map_out.empty())
    save_image(opts.map_out, Image(ckpt.model.spec.n, v.map.pixels), "lipschitz_map");
  return v;
}

Tensor input_tensor(const SamplePair& s) {
  return Tensor{"input", {s.input.values.size()}, s.input.values};
}

}  // namespace lipgate
