#pragma once
// Run configuration: `key = value` text with '#' comments. Unknown or repeated
// keys are rejected; omitted keys keep their defaults.

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "medirl/common.hpp"
#include "medirl/evaluator.hpp"
#include "medirl/grid.hpp"
#include "medirl/manual_prior.hpp"
#include "medirl/reward_net.hpp"
#include "medirl/trainer.hpp"
#include "medirl/world_sim.hpp"

namespace medirl {

struct RunConfig {
  std::uint64_t seed = 1;
  GridSpec grid;
  ManualRules rules;
  int hidden_channels = 8;
  TrainConfig train;
  SuiteSettings suite;
  std::size_t mhd_samples = 10;
  std::uint64_t corner_case_seed = 7;
  std::string data_dir = "data";
  std::string out_dir = "out";

  [[nodiscard]] NetConfig net() const {
    NetConfig n;
    n.main1 = {3, hidden_channels, 5};
    n.main2 = {hidden_channels, hidden_channels, 3};
    n.scale = {3, hidden_channels, 5};
    n.merge = {2 * hidden_channels, 1, 1};
    return n;
  }

  /// Training settings with the run seed and the shared reward/horizon applied.
  [[nodiscard]] TrainConfig train_config() const {
    TrainConfig t = train;
    t.seed = seed;
    t.reward_scale = suite.demos.reward_scale;
    t.horizon = suite.demos.max_len;
    return t;
  }

  [[nodiscard]] SuiteSettings suite_settings() const {
    SuiteSettings s = suite;
    s.spec = grid;
    return s;
  }

  [[nodiscard]] EvalSettings eval_settings() const {
    return {suite.demos.reward_scale, suite.demos.max_len, mhd_samples, derive_seed(seed, 0xe7a1)};
  }

  void validate() const {
    try {
      grid.validate();
      rules.validate();
      net().validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (hidden_channels < 1) throw ConfigError("net.hidden_channels must be >= 1");
    train_config().validate();
    eval_settings().validate();
    if (suite.train_count < 2) throw ConfigError("data.train_scenarios must be >= 2");
    if (suite.test_count < 1) throw ConfigError("data.test_scenarios must be >= 1");
    if (suite.demos.count < 1) throw ConfigError("data.demos_per_scenario must be >= 1");
    if (suite.collisions_per_scenario < 1) throw ConfigError("data.collisions_per_scenario must be >= 1");
    if (suite.demos.max_len < 2) throw ConfigError("data.max_len must be >= 2");
    if (suite.demos.min_distance < 1 || suite.demos.max_distance < suite.demos.min_distance)
      throw ConfigError("data.min_distance/max_distance must satisfy 1 <= min <= max");
    if (grid.height % 2 || grid.width % 2) throw ConfigError("grid dimensions must be even");
  }
};

namespace detail {

struct ConfigField {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_config_value(std::string_view v) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "1") return true;
      if (v == "false" || v == "0") return false;
      throw DataError("not a boolean");
    } else if constexpr (std::is_same_v<T, double>) {
      return parse_double(v);
    } else if constexpr (std::is_same_v<T, std::string>) {
      return std::string(v);
    } else {
      return parse_int<T>(v);
    }
  } catch (const DataError&) {
    throw ConfigError("invalid value '" + std::string(v) + "'");
  }
}

template <typename T>
std::string format_config_value(const T& v) {
  if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
  else if constexpr (std::is_same_v<T, double>) return format_double(v);
  else if constexpr (std::is_same_v<T, std::string>) return v;
  else return std::to_string(v);
}

template <typename T>
ConfigField field(std::function<T&(RunConfig&)> ref) {
  return {[ref](RunConfig& c, std::string_view v) { ref(c) = parse_config_value<T>(v); },
          [ref](const RunConfig& c) { return format_config_value(ref(const_cast<RunConfig&>(c))); }};
}

#define MEDIRL_FIELD(T, expr) field<T>(std::function<T&(RunConfig&)>([](RunConfig& c) -> T& { return c.expr; }))

inline const std::map<std::string, ConfigField, std::less<>>& config_fields() {
  static const std::map<std::string, ConfigField, std::less<>> fields = {
      {"seed", MEDIRL_FIELD(std::uint64_t, seed)},
      {"grid.height", MEDIRL_FIELD(int, grid.height)},
      {"grid.width", MEDIRL_FIELD(int, grid.width)},
      {"grid.cell_size", MEDIRL_FIELD(double, grid.cell_size)},
      {"rules.height_range_threshold", MEDIRL_FIELD(double, rules.height_range_threshold)},
      {"rules.dilation_radius", MEDIRL_FIELD(int, rules.dilation_radius)},
      {"rules.obstacle_cost", MEDIRL_FIELD(double, rules.obstacle_cost)},
      {"rules.free_cost", MEDIRL_FIELD(double, rules.free_cost)},
      {"net.hidden_channels", MEDIRL_FIELD(int, hidden_channels)},
      {"train.pretrain", MEDIRL_FIELD(bool, train.pretrain)},
      {"train.pretrain_epochs", MEDIRL_FIELD(int, train.pretrain_epochs)},
      {"train.finetune_epochs", MEDIRL_FIELD(int, train.finetune_epochs)},
      {"train.pretrain_learning_rate", MEDIRL_FIELD(double, train.pretrain_learning_rate)},
      {"train.learning_rate", MEDIRL_FIELD(double, train.learning_rate)},
      {"train.l2_coeff", MEDIRL_FIELD(double, train.l2_coeff)},
      {"train.early_stop_patience", MEDIRL_FIELD(int, train.early_stop_patience)},
      {"train.early_stop_min_delta", MEDIRL_FIELD(double, train.early_stop_min_delta)},
      {"train.val_fraction", MEDIRL_FIELD(double, train.val_fraction)},
      {"data.train_scenarios", MEDIRL_FIELD(std::size_t, suite.train_count)},
      {"data.test_scenarios", MEDIRL_FIELD(std::size_t, suite.test_count)},
      {"data.demos_per_scenario", MEDIRL_FIELD(std::size_t, suite.demos.count)},
      {"data.collisions_per_scenario", MEDIRL_FIELD(std::size_t, suite.collisions_per_scenario)},
      {"data.max_len", MEDIRL_FIELD(int, suite.demos.max_len)},
      {"data.reward_scale", MEDIRL_FIELD(double, suite.demos.reward_scale)},
      {"data.min_distance", MEDIRL_FIELD(int, suite.demos.min_distance)},
      {"data.max_distance", MEDIRL_FIELD(int, suite.demos.max_distance)},
      {"eval.mhd_samples", MEDIRL_FIELD(std::size_t, mhd_samples)},
      {"eval.corner_case_seed", MEDIRL_FIELD(std::uint64_t, corner_case_seed)},
      {"paths.data", MEDIRL_FIELD(std::string, data_dir)},
      {"paths.out", MEDIRL_FIELD(std::string, out_dir)},
      {"train.optimizer",
       ConfigField{[](RunConfig& c, std::string_view v) { c.train.optimizer = parse_optimizer(v); },
                   [](const RunConfig& c) { return std::string(optimizer_name(c.train.optimizer)); }}},
  };
  return fields;
}

#undef MEDIRL_FIELD

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace detail

/// Applies one `key = value` assignment.
inline void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  const auto& fields = detail::config_fields();
  const auto it = fields.find(key);
  if (it == fields.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  try {
    it->second.set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError("key '" + std::string(key) + "': " + e.what());
  }
}

/// Parses and validates a config. Errors carry the line number.
inline RunConfig parse_config(std::istream& is) {
  RunConfig cfg;
  std::map<std::string, int, std::less<>> seen;
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const auto key = detail::trim(s.substr(0, eq));
    const auto value = detail::trim(s.substr(eq + 1));
    if (const auto [it, fresh] = seen.emplace(std::string(key), lineno); !fresh)
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + std::string(key) +
                        "' (first on line " + std::to_string(it->second) + ")");
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

inline RunConfig parse_config(std::string_view text) {
  std::istringstream is{std::string(text)};
  return parse_config(is);
}

/// Canonical form: every key in sorted order. parse_config(write) round-trips.
/// Without paths the text depends only on what is computed, not where it goes.
inline void write_config(std::ostream& os, const RunConfig& cfg, bool with_paths = true) {
  for (const auto& [key, f] : detail::config_fields())
    if (with_paths || !key.starts_with("paths.")) os << key << " = " << f.get(cfg) << '\n';
}

/// Hash of the path-free canonical form.
inline std::string config_hash(const RunConfig& cfg) {
  std::ostringstream os;
  write_config(os, cfg, false);
  return hex64(fnv1a(os.str()));
}

}  // namespace medirl
