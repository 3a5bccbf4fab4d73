#pragma once

// The subcommands behind the `lipgate` tool, callable in-process.

#include "lipgate/config.hpp"
#include "lipgate/io.hpp"
#include "lipgate/metrics.hpp"
#include "lipgate/uncertainty.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lipgate {

struct DatagenOutput {
  std::vector<std::string> paths;  // train, test_id, test_ood (those with count > 0)
};

std::string train_dataset_path(const RunConfig& cfg);
std::string test_id_dataset_path(const RunConfig& cfg);
std::string test_ood_dataset_path(const RunConfig& cfg);

/// Builds the three datasets in memory. Training phantoms start at the run
/// seed; ID and OOD test phantoms start at fixed offsets above it.
Dataset make_train_dataset(const RunConfig& cfg);
Dataset make_test_dataset(const RunConfig& cfg, PhantomFamily family);

DatagenOutput cmd_datagen(const RunConfig& cfg);

/// Trains from cfg.paths.data_dir/train.lipd (or `dataset_path`), writes the
/// checkpoint and the loss-history CSV.
TrainResult cmd_train(const RunConfig& cfg, const std::optional<std::string>& dataset_path = {},
                      const EpochCallback& on_epoch = {});

enum class EvalMethod { Single, Mc, Ensemble };
EvalMethod parse_eval_method(std::string_view text);

/// Seed of the perturbation used for a sample's Lipschitz estimate.
std::uint64_t sample_seed(std::uint64_t run_seed, std::uint64_t sample_id);
/// Base seed of the k variance perturbations for a sample.
std::uint64_t variance_seed(std::uint64_t run_seed, std::uint64_t sample_id);

/// Scores one dataset. sample_id is the phantom seed; the label follows the
/// dataset family. Automap tasks use the perturbation Lipschitz estimate;
/// denoise and ct use the pairwise estimate between fresh pair_lo and pair_hi
/// noisy inputs of the same phantom.
std::vector<EvalRecord> evaluate(const RunConfig& cfg, std::span<const Checkpoint> checkpoints,
                                 const Dataset& ds, EvalMethod method);

std::vector<EvalRecord> cmd_eval(const RunConfig& cfg, const std::vector<std::string>& checkpoints,
                                 const std::string& dataset_path, EvalMethod method,
                                 const std::string& out_csv);

enum class ScoreColumn { Lipschitz, Variance };
ScoreColumn parse_score_column(std::string_view text);

RocCurve ood_curve(std::span<const EvalRecord> id, std::span<const EvalRecord> ood, ScoreColumn column);
RocCurve cmd_ood(const std::string& id_csv, const std::string& ood_csv, ScoreColumn column,
                 const std::string& roc_out);

struct Calibration {
  GateThreshold threshold;
  ReferralCurve curve;
};

Calibration calibrate(std::span<const EvalRecord> records, double mae_limit,
                      std::size_t steps = kDefaultReferralSteps);
Calibration cmd_calibrate(const std::string& records_csv, double mae_limit,
                          const std::string& curve_out);

struct GateVerdict {
  bool accept = false;
  LipschitzScore score;
  Image reconstruction;
  UncertaintyMap map;
};

/// ACCEPT iff L < gamma.
GateVerdict gate(const ReconModel& model, std::span<const double> input, double gamma,
                 double noise_fraction, std::uint64_t seed);

struct GateOptions {
  std::string checkpoint;
  std::string input;  // tensor file holding the sensor input
  double gamma = 0.0;
  std::optional<double> noise_fraction;  // default: checkpoint config
  std::uint64_t seed = 0;                // run seed
  std::uint64_t sample_id = 0;
  std::string recon_out;
  std::string map_out;
};

GateVerdict cmd_gate(const GateOptions& opts);

/// Sensor input of a dataset sample as a tensor (for the gate).
Tensor input_tensor(const SamplePair& s);

}  // namespace lipgate
