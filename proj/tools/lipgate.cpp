#include "lipgate/commands.hpp"
#include "lipgate/error.hpp"
#include "lipgate/log.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <limits>

using namespace lipgate;

namespace {

constexpr int kExitRefer = 2;

RunConfig resolve_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_config(path);
  if (seed) override_seed(cfg, *seed);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-gated image reconstruction: data, training, scoring and the accept/refer gate"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

  std::string config_path;
  std::optional<std::uint64_t> seed;

  auto* datagen = app.add_subcommand("datagen", "Write train/test_id/test_ood datasets");
  datagen->add_option("--config", config_path, "INI config file")->required()->check(CLI::ExistingFile);
  datagen->add_option("--seed", seed, "Override the run seed");

  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  std::string train_data;
  train_cmd->add_option("--config", config_path, "INI config file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", seed, "Override the run seed");
  train_cmd->add_option("--data", train_data, "Training dataset (default: <data_dir>/train.lipd)");

  auto* eval_cmd = app.add_subcommand("eval", "Score a dataset, writing a records CSV");
  std::vector<std::string> checkpoints;
  std::string eval_data, eval_out, method_name = "single";
  eval_cmd->add_option("--config", config_path, "INI config file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--seed", seed, "Override the run seed");
  eval_cmd->add_option("--checkpoint", checkpoints, "Checkpoint (repeat for ensembles)")->required();
  eval_cmd->add_option("--dataset", eval_data, "Dataset file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--method", method_name, "single | mc | ensemble")
      ->check(CLI::IsMember({"single", "mc", "ensemble"}));
  eval_cmd->add_option("--out", eval_out, "Records CSV (default: [paths] records_csv)");

  auto* ood_cmd = app.add_subcommand("ood", "ROC/AUC of ID vs OOD records");
  std::string id_csv, ood_csv, roc_out, column = "lipschitz";
  ood_cmd->add_option("--id", id_csv, "ID records CSV")->required()->check(CLI::ExistingFile);
  ood_cmd->add_option("--ood", ood_csv, "OOD records CSV")->required()->check(CLI::ExistingFile);
  ood_cmd->add_option("--score", column, "lipschitz | variance")
      ->check(CLI::IsMember({"lipschitz", "variance"}));
  ood_cmd->add_option("--roc-out", roc_out, "fpr,tpr CSV");

  auto* cal_cmd = app.add_subcommand("calibrate", "Choose gamma from a referral curve");
  std::string cal_csv, curve_out;
  double mae_limit = 0.0;
  cal_cmd->add_option("--records", cal_csv, "ID records CSV")->required()->check(CLI::ExistingFile);
  cal_cmd->add_option("--mae-limit", mae_limit, "Acceptable mean MAE of the retained set")->required();
  cal_cmd->add_option("--curve-out", curve_out, "fraction,mean_lip,mean_mae CSV");

  auto* gate_cmd = app.add_subcommand("gate", "ACCEPT (exit 0) or REFER (exit 2) one input");
  GateOptions gate_opts;
  double gate_noise = 0.0;
  gate_cmd->add_option("--checkpoint", gate_opts.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  gate_cmd->add_option("--input", gate_opts.input, "Sensor input tensor file")->required()->check(CLI::ExistingFile);
  gate_cmd->add_option("--gamma", gate_opts.gamma, "Lipschitz threshold")->required();
  auto* noise_opt = gate_cmd->add_option("--noise-fraction", gate_noise, "Perturbation level (default from checkpoint)");
  gate_cmd->add_option("--seed", gate_opts.seed, "Run seed");
  gate_cmd->add_option("--sample-id", gate_opts.sample_id, "Sample id mixed into the perturbation seed");
  gate_cmd->add_option("--recon-out", gate_opts.recon_out, "Reconstruction tensor file");
  gate_cmd->add_option("--map-out", gate_opts.map_out, "Uncertainty map tensor file");

  CLI11_PARSE(app, argc, argv);
  set_quiet(quiet);

  try {
    if (datagen->parsed()) {
      const auto out = cmd_datagen(resolve_config(config_path, seed));
      for (const auto& p : out.paths) std::cout << p << "\n";
    } else if (train_cmd->parsed()) {
      const RunConfig cfg = resolve_config(config_path, seed);
      auto progress = [](const EpochStats& e) {
        log_info("epoch " + std::to_string(e.epoch) + " loss " + format_double(e.mean_total_loss));
      };
      cmd_train(cfg, train_data.empty() ? std::nullopt : std::optional<std::string>(train_data), progress);
      std::cout << cfg.paths.checkpoint << "\n";
    } else if (eval_cmd->parsed()) {
      const RunConfig cfg = resolve_config(config_path, seed);
      const std::string out = eval_out.empty() ? cfg.paths.records_csv : eval_out;
      const auto records = cmd_eval(cfg, checkpoints, eval_data, parse_eval_method(method_name), out);
      std::cout << records.size() << " records -> " << out << "\n";
    } else if (ood_cmd->parsed()) {
      const RocCurve c = cmd_ood(id_csv, ood_csv, parse_score_column(column), roc_out);
      std::printf("AUC %.6f\n", c.auc);
    } else if (cal_cmd->parsed()) {
      try {
        const Calibration c = cmd_calibrate(cal_csv, mae_limit, curve_out);
        std::printf("gamma %s\nfraction %.6f\nreferred %zu\n", format_double(c.threshold.gamma).c_str(),
                    c.threshold.fraction, c.threshold.referred);
      } catch (const InfeasibleThresholdError& e) {
        std::fprintf(stderr, "error: %s\nminimum achievable mean MAE %s\n", e.what(),
                     format_double(e.min_achievable_mae()).c_str());
        return 1;
      }
    } else if (gate_cmd->parsed()) {
      if (noise_opt->count() > 0) gate_opts.noise_fraction = gate_noise;
      const GateVerdict v = cmd_gate(gate_opts);
      std::printf("%s L=%s gamma=%s\n", v.accept ? "ACCEPT" : "REFER",
                  format_double(v.score.value).c_str(), format_double(gate_opts.gamma).c_str());
      return v.accept ? 0 : kExitRefer;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
