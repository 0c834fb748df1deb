// medirl: generate synthetic data, train cost-map networks, evaluate and render.
//
// Exit codes: 0 success, 1 usage, 2 config error, 3 data/IO error, 4 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "medirl/commands.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kData = 3, kNumerical = 4 };

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
};

medirl::RunConfig load_config(const Common& c) {
  medirl::RunConfig cfg;
  if (!c.config_path.empty()) {
    std::ifstream is(c.config_path);
    if (!is) throw medirl::ConfigError("cannot open config file " + c.config_path);
    cfg = medirl::parse_config(is);
  }
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (!c.data.empty()) cfg.data_dir = c.data;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* sub, Common& c, bool wants_data) {
  sub->add_option("--config", c.config_path, "Run config file (key = value)");
  sub->add_option("--seed", c.seed, "Master seed (overrides the config)");
  sub->add_option("--out", c.out, "Output directory (overrides paths.out)");
  if (wants_data) sub->add_option("--data", c.data, "Dataset directory from `gen` (overrides paths.data)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum-entropy deep IRL cost maps with manual-prior pretraining"};
  app.require_subcommand(1);

  Common common;
  bool no_pretrain = false;
  std::string init, wo_model, w_model;

  auto* gen = app.add_subcommand("gen", "Generate train/test scenarios, demonstrations and collision sets");
  add_common(gen, common, false);

  auto* pre = app.add_subcommand("pretrain", "Regress the network onto the manual cost map");
  add_common(pre, common, true);

  auto* train = app.add_subcommand("train", "Fine-tune with MaxEnt deep IRL (pretraining first by default)");
  add_common(train, common, true);
  train->add_flag("--no-pretrain", no_pretrain, "Start from random initialisation");
  train->add_option("--init", init, "Resume fine-tuning from this checkpoint");

  auto* eval = app.add_subcommand("eval", "Compare manual, wo_pretrain and w_pretrain on the test split");
  add_common(eval, common, true);
  eval->add_option("--wo-pretrain", wo_model, "Checkpoint trained without pretraining")->required();
  eval->add_option("--w-pretrain", w_model, "Checkpoint trained with pretraining")->required();

  auto* render = app.add_subcommand("render", "Render corner-case cost maps for every source");
  add_common(render, common, false);
  render->add_option("--wo-pretrain", wo_model, "Checkpoint trained without pretraining")->required();
  render->add_option("--w-pretrain", w_model, "Checkpoint trained with pretraining")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    auto cfg = load_config(common);
    if (no_pretrain) cfg.train.pretrain = false;
    const std::filesystem::path out = cfg.out_dir, data = cfg.data_dir;
    if (*gen) medirl::cmd_gen(cfg, out);
    if (*pre) medirl::cmd_pretrain(cfg, data, out);
    if (*train) {
      if (!init.empty() && no_pretrain) throw medirl::ConfigError("--init and --no-pretrain are exclusive");
      medirl::cmd_train(cfg, data, out, init.empty() ? std::nullopt : std::optional<std::filesystem::path>(init));
    }
    if (*eval) medirl::cmd_eval(cfg, data, wo_model, w_model, out);
    if (*render) medirl::cmd_render(cfg, wo_model, w_model, out);
  } catch (const medirl::ConfigError& e) {
    std::cerr << "medirl: config error: " << e.what() << '\n';
    return kConfig;
  } catch (const medirl::NumericalError& e) {
    std::cerr << "medirl: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const medirl::DataError& e) {
    std::cerr << "medirl: data error: " << e.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "medirl: io error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "medirl: data error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
