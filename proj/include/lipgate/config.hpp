#pragma once

// Run configuration: an INI file with [task], [arch], [train], [data],
// [uncertainty] and [paths] sections. Unknown sections or keys are rejected.

#include "lipgate/datagen.hpp"
#include "lipgate/models.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

namespace lipgate {

struct DataConfig {
  PhantomFamily family = PhantomFamily::IdEllipse;  // training family
  std::size_t train_count = 2000;
  std::size_t test_id_count = 500;
  std::size_t test_ood_count = 500;
  bool augment = false;
  double noise_fraction = 0.01;       // training inputs: multiplicative k-space (automap) or task noise
  double test_noise_fraction = 0.0;   // test inputs; automap tests are clean encodings
  std::size_t ct_views = 360;
  std::size_t ct_factor = 4;

  bool operator==(const DataConfig&) const = default;
};

struct UncertaintyConfig {
  double noise_fraction = 0.05;
  std::size_t k = 4;
  std::size_t iterations = 50;
  std::size_t ensemble_size = 5;
  double pair_lo = 0.10;  // UNET pairwise inputs
  double pair_hi = 0.15;

  bool operator==(const UncertaintyConfig&) const = default;
};

struct PathsConfig {
  std::string data_dir = "data";
  std::string checkpoint = "model.lipg";
  std::string loss_csv = "loss.csv";
  std::string records_csv = "records.csv";

  bool operator==(const PathsConfig&) const = default;
};

struct RunConfig {
  Task task = Task::Automap;
  std::uint64_t seed = 0;
  ArchSpec arch = ArchSpec::automap(32);
  TrainConfig train = TrainConfig::automap_defaults();
  DataConfig data;
  UncertaintyConfig uncertainty;
  PathsConfig paths;

  /// Defaults for a task at side n (automap or residual U-Net).
  static RunConfig defaults(Task task, std::size_t n = 32);

  /// Throws ConfigError on any inconsistent field.
  void validate() const;

  /// Deterministic INI rendering; parse_config(to_ini()) reproduces *this.
  std::string to_ini() const;

  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(const std::string& ini_text);
RunConfig load_config(const std::string& path);

/// Applies --seed: the run seed also seeds training.
void override_seed(RunConfig& cfg, std::uint64_t seed);

}  // namespace lipgate
