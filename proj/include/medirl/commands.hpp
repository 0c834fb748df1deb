#pragma once
// Pipeline verbs behind the command-line tool: gen, pretrain, train, eval, render.
// Every verb writes only below its output directory, atomically per file, and
// records what it wrote in a manifest.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "medirl/common.hpp"
#include "medirl/config.hpp"
#include "medirl/evaluator.hpp"
#include "medirl/trainer.hpp"
#include "medirl/world_sim.hpp"

namespace medirl {

namespace fs = std::filesystem;

inline constexpr const char* kManifestName = "manifest.txt";

/// Writes `content` to `path` through a temporary sibling and a rename, so an
/// interrupted run never leaves a truncated file behind.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + tmp.string());
    os << content;
    if (!os.flush()) throw DataError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

template <typename F>
std::string to_text(F&& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

/// Collects emitted files; `finish` writes them as a manifest with hashes.
class Manifest {
 public:
  Manifest(std::string command, const RunConfig& cfg) : command_(std::move(command)), cfg_(cfg) {}

  void write(const fs::path& root, const std::string& rel, const std::string& content) {
    write_file_atomic(root / rel, content);
    files_.emplace_back(rel, hex64(fnv1a(content)));
  }

  void note(std::string line) { notes_.push_back(std::move(line)); }

  void finish(const fs::path& root) {
    std::ostringstream os;
    os << "medirl-manifest 1\ncommand " << command_ << "\nconfig_hash " << config_hash(cfg_) << "\nseed "
       << cfg_.seed << '\n';
    for (const auto& n : notes_) os << n << '\n';
    for (const auto& [rel, h] : files_) os << "file " << rel << ' ' << h << '\n';
    write_file_atomic(root / kManifestName, os.str());
  }

  [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

 private:
  std::string command_;
  RunConfig cfg_;
  std::vector<std::string> notes_;
  std::vector<std::pair<std::string, std::string>> files_;
};

// ---------------------------------------------------------------------------
// Dataset layout: <dir>/{train,test}/scenario_NNN.{scenario,demos,collisions}.txt

inline std::string scenario_stem(const std::string& split, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scenario_%03zu", i);
  return split + "/" + buf;
}

inline void cmd_gen(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto settings = cfg.suite_settings();
  Manifest m("gen", cfg);
  m.write(out, "config.txt", to_text([&](std::ostream& os) { write_config(os, cfg, false); }));
  const auto emit = [&](const std::string& split, std::size_t i, std::size_t index) {
    const auto l = make_suite_scenario(cfg.seed, index, settings);
    const std::string stem = scenario_stem(split, i);
    m.note("scenario " + stem + " seed " + std::to_string(l.scenario.seed));
    m.write(out, stem + ".scenario.txt", to_text([&](std::ostream& os) { write_scenario(os, l.scenario); }));
    m.write(out, stem + ".demos.txt", to_text([&](std::ostream& os) { write_trajectories(os, l.demos); }));
    m.write(out, stem + ".collisions.txt",
            to_text([&](std::ostream& os) { write_trajectories(os, l.collisions); }));
  };
  for (std::size_t i = 0; i < settings.train_count; ++i) emit("train", i, i);
  for (std::size_t i = 0; i < settings.test_count; ++i) emit("test", i, settings.train_count + i);
  m.finish(out);
  log_info("gen: wrote " + std::to_string(m.files().size()) + " files to " + out.string());
}

inline std::vector<LabeledScenario> load_split(const fs::path& data, const std::string& split) {
  if (!fs::is_directory(data)) throw DataError("data directory not found: " + data.string());
  if (!fs::is_directory(data / split)) throw DataError("missing split directory: " + (data / split).string());
  std::vector<LabeledScenario> out;
  for (std::size_t i = 0;; ++i) {
    const std::string stem = scenario_stem(split, i);
    const fs::path sp = data / (stem + ".scenario.txt");
    if (!fs::exists(sp)) break;
    std::istringstream s(read_file(sp)), d(read_file(data / (stem + ".demos.txt"))),
        c(read_file(data / (stem + ".collisions.txt")));
    try {
      auto sc = read_scenario(s);
      auto demos = read_trajectories(d);
      auto collisions = read_trajectories(c);
      out.push_back({std::move(sc), std::move(demos), std::move(collisions)});
    } catch (const std::exception& e) {
      throw DataError(stem + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError("no scenarios in " + (data / split).string());
  return out;
}

inline NetworkParams load_checkpoint(const fs::path& p) {
  if (!fs::exists(p)) throw DataError("checkpoint not found: " + p.string());
  std::istringstream is(read_file(p));
  try {
    return load_params(is);
  } catch (const std::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

inline std::string checkpoint_text(const NetworkParams& p) {
  return to_text([&](std::ostream& os) { save_params(os, p); });
}

inline std::string report_text(const TrainReport& r) {
  return to_text([&](std::ostream& os) { write_report_csv(os, r); });
}

// ---------------------------------------------------------------------------
// Training verbs

/// Regression onto the manual prior only: writes pretrained.params.
inline void cmd_pretrain(const RunConfig& cfg, const fs::path& data, const fs::path& out) {
  cfg.validate();
  const auto train = load_split(data, "train");
  auto tc = cfg.train_config();
  const auto [tr, val] = split_indices(train.size(), tc.val_fraction, tc.seed);
  auto res = pretrain(init_params(derive_seed(tc.seed, 0x1a17), cfg.net()), train, tr, val, tc, cfg.rules);
  Manifest m("pretrain", cfg);
  m.write(out, "pretrained.params", checkpoint_text(res.params));
  m.write(out, "pretrain_report.csv", report_text(res.report));
  m.finish(out);
  log_info("pretrain: final training MSE " + format_double(res.report.epochs.back().train_loss));
}

/// Fine-tuning. With `init` the run resumes from that checkpoint; otherwise it
/// pretrains first unless pretraining is disabled.
inline void cmd_train(const RunConfig& cfg, const fs::path& data, const fs::path& out,
                      const std::optional<fs::path>& init) {
  cfg.validate();
  const auto train = load_split(data, "train");
  auto tc = cfg.train_config();
  std::optional<NetworkParams> start;
  if (init) {
    start = load_checkpoint(*init);
    tc.pretrain = false;
  }
  const auto res = run_pipeline(tc, train, cfg.rules, cfg.net(), start);
  Manifest m("train", cfg);
  m.note(std::string("branch ") + (init ? "resume" : (tc.pretrain ? "w_pretrain" : "wo_pretrain")));
  if (res.pretrained) {
    m.write(out, "pretrained.params", checkpoint_text(*res.pretrained));
    m.write(out, "pretrain_report.csv", report_text(res.pretrain_report));
  }
  m.write(out, "model.params", checkpoint_text(res.final_params));
  m.write(out, "finetune_report.csv", report_text(res.finetune_report));
  m.note("stopping_epoch " + std::to_string(res.finetune_report.stopping_epoch));
  m.finish(out);
  log_info("train: stopped at epoch " + std::to_string(res.finetune_report.stopping_epoch) +
           ", best epoch " + std::to_string(res.finetune_report.best_epoch));
}

// ---------------------------------------------------------------------------
// Evaluation verbs

inline std::string ppm_text(const CostMap& c) { return to_text([&](std::ostream& os) { write_ppm(os, c); }); }
inline std::string pgm_text(const CostMap& c) { return to_text([&](std::ostream& os) { write_pgm(os, c); }); }

/// One PPM and PGM per (corner-case scenario, source): manual, both models and
/// the ground-truth cost for reference.
inline void render_corner_cases(Manifest& m, const fs::path& out, const RunConfig& cfg,
                                const NetworkParams& wo, const NetworkParams& w) {
  for (const auto& [name, sc] : corner_case_set(cfg.corner_case_seed, cfg.grid)) {
    const std::pair<std::string, CostMap> sources[] = {
        {"manual", manual_cost(sc.grid, cfg.rules)},
        {"wo_pretrain", forward(wo, sc.grid).cost},
        {"w_pretrain", forward(w, sc.grid).cost},
        {"truth", sc.truth_cost},
    };
    for (const auto& [src, cost] : sources) {
      m.write(out, "render/" + name + "_" + src + ".ppm", ppm_text(cost));
      m.write(out, "render/" + name + "_" + src + ".pgm", pgm_text(cost));
    }
  }
}

inline void cmd_eval(const RunConfig& cfg, const fs::path& data, const fs::path& wo_path,
                     const fs::path& w_path, const fs::path& out) {
  cfg.validate();
  const auto wo = load_checkpoint(wo_path);
  const auto w = load_checkpoint(w_path);
  const auto test = load_split(data, "test");
  const auto report = compare_report(cfg.rules, wo, w, test, cfg.eval_settings());
  Manifest m("eval", cfg);
  m.write(out, "metrics.csv", to_text([&](std::ostream& os) { write_metrics_csv(os, report); }));
  m.write(out, "pr_curve.csv", to_text([&](std::ostream& os) { write_pr_csv(os, report); }));
  m.write(out, "per_scenario.csv", to_text([&](std::ostream& os) { write_per_scenario_csv(os, report); }));
  render_corner_cases(m, out, cfg, wo, w);
  m.finish(out);
  for (const auto& row : report.rows)
    log_info("eval: " + row.name + " nll " + format_double(row.nll) + " mhd " + format_double(row.mhd) +
             " pr_auc " + format_double(row.pr.auc));
}

inline void cmd_render(const RunConfig& cfg, const fs::path& wo_path, const fs::path& w_path,
                       const fs::path& out) {
  cfg.validate();
  const auto wo = load_checkpoint(wo_path);
  const auto w = load_checkpoint(w_path);
  Manifest m("render", cfg);
  render_corner_cases(m, out, cfg, wo, w);
  m.finish(out);
}

}  // namespace medirl
