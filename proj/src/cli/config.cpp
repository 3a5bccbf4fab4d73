#include "lipgate/config.hpp"

#include "lipgate/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace lipgate {

namespace {

namespace pt = boost::property_tree;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("key '" + key + "': cannot parse '" + text + "'");
  return value;
}

double as_double(const std::string& key, const std::string& text) {
  return parse_number<double>(key, text);
}

std::size_t as_size(const std::string& key, const std::string& text) {
  return parse_number<std::size_t>(key, text);
}

bool as_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + text + "'");
}

template <class F>
auto wrap(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"task",
       {
           // name is consumed while choosing defaults
           {"name", [](RunConfig&, const std::string&, const std::string&) {}},
           {"seed", [](RunConfig& c, const std::string& k, const std::string& v) {
              c.seed = parse_number<std::uint64_t>(k, v);
              c.train.seed = c.seed;
            }},
       }},
      {"arch",
       {
           {"kind", [](RunConfig&, const std::string&, const std::string&) {}},
           {"n", [](RunConfig&, const std::string&, const std::string&) {}},
           {"fc1_width", [](RunConfig& c, const std::string& k, const std::string& v) { c.arch.fc1_width = as_size(k, v); }},
           {"conv_filters", [](RunConfig& c, const std::string& k, const std::string& v) { c.arch.conv_filters = as_size(k, v); }},
           {"conv_kernel", [](RunConfig& c, const std::string& k, const std::string& v) { c.arch.conv_kernel = as_size(k, v); }},
           {"final_kernel", [](RunConfig& c, const std::string& k, const std::string& v) { c.arch.final_kernel = as_size(k, v); }},
           {"dropout_p", [](RunConfig& c, const std::string& k, const std::string& v) { c.arch.dropout_p = as_double(k, v); }},
           {"input_scale", [](RunConfig& c, const std::string& k, const std::string& v) { c.arch.input_scale = as_double(k, v); }},
       }},
      {"train",
       {
           {"learning_rate", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.learning_rate = as_double(k, v); }},
           {"rms_decay", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.rms_decay = as_double(k, v); }},
           {"momentum", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.momentum = as_double(k, v); }},
           {"batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = as_size(k, v); }},
           {"epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.epochs = as_size(k, v); }},
           {"l2_lambda", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.l2_lambda = as_double(k, v); }},
           {"l1_gamma", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.l1_gamma = as_double(k, v); }},
           {"epsilon", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.epsilon = as_double(k, v); }},
       }},
      {"data",
       {
           {"family", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.family = wrap(k, [&] { return parse_family(v); }); }},
           {"train_count", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.train_count = as_size(k, v); }},
           {"test_id_count", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.test_id_count = as_size(k, v); }},
           {"test_ood_count", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.test_ood_count = as_size(k, v); }},
           {"augment", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.augment = as_bool(k, v); }},
           {"noise_fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.noise_fraction = as_double(k, v); }},
           {"test_noise_fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.test_noise_fraction = as_double(k, v); }},
           {"ct_views", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.ct_views = as_size(k, v); }},
           {"ct_factor", [](RunConfig& c, const std::string& k, const std::string& v) { c.data.ct_factor = as_size(k, v); }},
       }},
      {"uncertainty",
       {
           {"noise_fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.uncertainty.noise_fraction = as_double(k, v); }},
           {"k", [](RunConfig& c, const std::string& k, const std::string& v) { c.uncertainty.k = as_size(k, v); }},
           {"iterations", [](RunConfig& c, const std::string& k, const std::string& v) { c.uncertainty.iterations = as_size(k, v); }},
           {"ensemble_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.uncertainty.ensemble_size = as_size(k, v); }},
           {"pair_lo", [](RunConfig& c, const std::string& k, const std::string& v) { c.uncertainty.pair_lo = as_double(k, v); }},
           {"pair_hi", [](RunConfig& c, const std::string& k, const std::string& v) { c.uncertainty.pair_hi = as_double(k, v); }},
       }},
      {"paths",
       {
           {"data_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.paths.data_dir = v; }},
           {"checkpoint", [](RunConfig& c, const std::string&, const std::string& v) { c.paths.checkpoint = v; }},
           {"loss_csv", [](RunConfig& c, const std::string&, const std::string& v) { c.paths.loss_csv = v; }},
           {"records_csv", [](RunConfig& c, const std::string&, const std::string& v) { c.paths.records_csv = v; }},
       }},
  };
  return table;
}

ArchSpec arch_for(ArchKind kind, std::size_t n) {
  switch (kind) {
    case ArchKind::Automap: return ArchSpec::automap(n);
    case ArchKind::AutomapDropout: return ArchSpec::automap_dropout(n);
    case ArchKind::UnetResidual: return ArchSpec::unet_residual(n);
  }
  throw ConfigError("unknown architecture");
}

}  // namespace

RunConfig RunConfig::defaults(Task task, std::size_t n) {
  RunConfig c;
  c.task = task;
  c.arch = arch_for(task == Task::Automap ? ArchKind::Automap : ArchKind::UnetResidual, n);
  c.train = TrainConfig::defaults_for(c.arch.kind);
  c.data.noise_fraction = task == Task::Automap ? 0.01 : 0.10;
  c.data.test_noise_fraction = task == Task::Automap ? 0.0 : 0.10;
  return c;
}

void RunConfig::validate() const {
  try {
    arch.validate();
    train.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (train.seed != seed) throw ConfigError("train seed must equal the run seed");
  if ((task == Task::Automap) != arch.is_automap())
    throw ConfigError("arch kind '" + std::string(to_string(arch.kind)) +
                      "' does not fit task '" + std::string(to_string(task)) + "'");
  if (data.train_count == 0 && data.test_id_count == 0 && data.test_ood_count == 0)
    throw ConfigError("data: all sample counts are zero");
  if (!(data.noise_fraction >= 0.0 && data.noise_fraction <= 1.0))
    throw ConfigError("data.noise_fraction must lie in [0, 1]");
  if (!(data.test_noise_fraction >= 0.0 && data.test_noise_fraction <= 1.0))
    throw ConfigError("data.test_noise_fraction must lie in [0, 1]");
  if (data.ct_factor == 0 || data.ct_views == 0 || data.ct_views % data.ct_factor != 0)
    throw ConfigError("data.ct_factor must divide data.ct_views");
  if (!(uncertainty.noise_fraction > 0.0 && uncertainty.noise_fraction <= 1.0))
    throw ConfigError("uncertainty.noise_fraction must lie in (0, 1]");
  if (uncertainty.k < 2) throw ConfigError("uncertainty.k must be >= 2");
  if (uncertainty.iterations < 2) throw ConfigError("uncertainty.iterations must be >= 2");
  if (uncertainty.ensemble_size < 2) throw ConfigError("uncertainty.ensemble_size must be >= 2");
  if (!(uncertainty.pair_lo > 0.0 && uncertainty.pair_lo < uncertainty.pair_hi &&
        uncertainty.pair_hi <= 1.0))
    throw ConfigError("uncertainty pair levels must satisfy 0 < pair_lo < pair_hi <= 1");
}

std::string RunConfig::to_ini() const {
  std::ostringstream o;
  o << "[task]\n"
    << "name = " << to_string(task) << "\n"
    << "seed = " << seed << "\n\n"
    << "[arch]\n"
    << "kind = " << to_string(arch.kind) << "\n"
    << "n = " << arch.n << "\n"
    << "fc1_width = " << arch.fc1_width << "\n"
    << "conv_filters = " << arch.conv_filters << "\n"
    << "conv_kernel = " << arch.conv_kernel << "\n"
    << "final_kernel = " << arch.final_kernel << "\n"
    << "dropout_p = " << fmt_double(arch.dropout_p) << "\n"
    << "input_scale = " << fmt_double(arch.input_scale) << "\n\n"
    << "[train]\n"
    << "learning_rate = " << fmt_double(train.learning_rate) << "\n"
    << "rms_decay = " << fmt_double(train.rms_decay) << "\n"
    << "momentum = " << fmt_double(train.momentum) << "\n"
    << "batch_size = " << train.batch_size << "\n"
    << "epochs = " << train.epochs << "\n"
    << "l2_lambda = " << fmt_double(train.l2_lambda) << "\n"
    << "l1_gamma = " << fmt_double(train.l1_gamma) << "\n"
    << "epsilon = " << fmt_double(train.epsilon) << "\n\n"
    << "[data]\n"
    << "family = " << to_string(data.family) << "\n"
    << "train_count = " << data.train_count << "\n"
    << "test_id_count = " << data.test_id_count << "\n"
    << "test_ood_count = " << data.test_ood_count << "\n"
    << "augment = " << (data.augment ? "true" : "false") << "\n"
    << "noise_fraction = " << fmt_double(data.noise_fraction) << "\n"
    << "test_noise_fraction = " << fmt_double(data.test_noise_fraction) << "\n"
    << "ct_views = " << data.ct_views << "\n"
    << "ct_factor = " << data.ct_factor << "\n\n"
    << "[uncertainty]\n"
    << "noise_fraction = " << fmt_double(uncertainty.noise_fraction) << "\n"
    << "k = " << uncertainty.k << "\n"
    << "iterations = " << uncertainty.iterations << "\n"
    << "ensemble_size = " << uncertainty.ensemble_size << "\n"
    << "pair_lo = " << fmt_double(uncertainty.pair_lo) << "\n"
    << "pair_hi = " << fmt_double(uncertainty.pair_hi) << "\n\n"
    << "[paths]\n"
    << "data_dir = " << paths.data_dir << "\n"
    << "checkpoint = " << paths.checkpoint << "\n"
    << "loss_csv = " << paths.loss_csv << "\n"
    << "records_csv = " << paths.records_csv << "\n";
  return o.str();
}

RunConfig parse_config(const std::string& ini_text) {
  pt::ptree tree;
  try {
    std::istringstream in(ini_text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    const auto it = table.find(section);
    if (it == table.end()) throw ConfigError("unknown config section [" + section + "]");
    if (!body.data().empty()) throw ConfigError("config key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key))
        throw ConfigError("unknown config key '" + key + "' in [" + section + "]");
      if (!value.empty()) throw ConfigError("nested value under '" + section + "." + key + "'");
    }
  }

  auto get = [&](const std::string& path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return *v;
    return std::nullopt;
  };

  Task task = Task::Automap;
  if (auto v = get("task.name")) task = wrap("task.name", [&] { return parse_task(*v); });
  std::size_t n = 32;
  if (auto v = get("arch.n")) n = as_size("arch.n", *v);
  RunConfig cfg = wrap("arch.n", [&] { return RunConfig::defaults(task, n); });
  if (auto v = get("arch.kind")) {
    const ArchKind kind = wrap("arch.kind", [&] { return parse_arch_kind(*v); });
    cfg.arch = wrap("arch.kind", [&] { return arch_for(kind, n); });
    cfg.train = TrainConfig::defaults_for(kind);
  }

  for (const auto& [section, body] : tree)
    for (const auto& [key, value] : body)
      table.at(section).at(key)(cfg, section + "." + key, value.data());

  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void override_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.train.seed = seed;
}

}  // namespace lipgate
