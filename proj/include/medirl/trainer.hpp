#pragma once
// Two-phase training: optional regression onto the manual prior, then MaxEnt
// deep IRL fine-tuning with early stopping on validation NLL.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "medirl/common.hpp"
#include "medirl/grid_mdp.hpp"
#include "medirl/manual_prior.hpp"
#include "medirl/maxent_solver.hpp"
#include "medirl/reward_net.hpp"
#include "medirl/world_sim.hpp"

namespace medirl {

enum class OptimizerKind { Sgd, Adam };

inline const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

inline OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

struct TrainConfig {
  bool pretrain = true;
  int pretrain_epochs = 20;
  int finetune_epochs = 40;
  double pretrain_learning_rate = 0.003;
  double learning_rate = 0.01;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double l2_coeff = 1e-4;
  int early_stop_patience = 4;
  double early_stop_min_delta = 0.0;  // validation NLL must drop by more than this to count
  double val_fraction = 0.2;
  std::uint64_t seed = 1;
  double reward_scale = 50;  // reward = -reward_scale * cost
  int horizon = 26;

  void validate() const {
    if (pretrain_epochs < 0 || finetune_epochs < 0) throw ConfigError("epoch budgets must be >= 0");
    if (!(pretrain_learning_rate > 0) || !(learning_rate > 0))
      throw ConfigError("learning rates must be positive");
    if (!(l2_coeff >= 0) || !std::isfinite(l2_coeff)) throw ConfigError("l2_coeff must be >= 0");
    if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
    if (!(early_stop_min_delta >= 0) || !std::isfinite(early_stop_min_delta))
      throw ConfigError("early_stop_min_delta must be >= 0");
    if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("val_fraction must be in (0,1)");
    if (!(reward_scale > 0) || !std::isfinite(reward_scale)) throw ConfigError("reward_scale must be positive");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
  }
};

struct EpochRecord {
  std::string phase;  // "pretrain" or "finetune"
  int epoch = 0;      // 0 = evaluation of the incoming parameters
  double train_loss = 0.0;       // data term: MSE (pretrain) or NLL (finetune)
  double validation_loss = 0.0;
  double regularizer = 0.0;      // (l2/2) |theta|^2 at the end of the epoch
  double grad_norm = 0.0;        // mean L2 norm of the per-scenario gradients

  [[nodiscard]] double total() const { return train_loss + regularizer; }
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int stopping_epoch = 0;  // last epoch that ran
  int best_epoch = 0;      // epoch whose parameters were returned
};

inline void write_report_csv(std::ostream& os, const TrainReport& r) {
  os << "phase,epoch,train_loss,validation_loss,regularizer,total,grad_norm\n";
  for (const auto& e : r.epochs)
    os << e.phase << ',' << e.epoch << ',' << format_double(e.train_loss) << ','
       << format_double(e.validation_loss) << ',' << format_double(e.regularizer) << ','
       << format_double(e.total()) << ',' << format_double(e.grad_norm) << '\n';
  os << "# stopping_epoch=" << r.stopping_epoch << " best_epoch=" << r.best_epoch << '\n';
}

/// Gradient step on flattened parameters. Adam keeps its moments across calls.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, std::size_t n) : kind_(kind), lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void step(NetworkParams& params, const NetworkParams& grad) {
    if (kind_ == OptimizerKind::Sgd) {
      params.axpy(-lr_, grad);
      return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t_;
    auto theta = params.flatten();
    const auto g = grad.flatten();
    const double c1 = 1.0 - std::pow(b1, t_), c2 = 1.0 - std::pow(b2, t_);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m_[i] = b1 * m_[i] + (1 - b1) * g[i];
      v_[i] = b2 * v_[i] + (1 - b2) * g[i] * g[i];
      theta[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
    }
    params = NetworkParams::unflatten(params.config, theta);
  }

 private:
  OptimizerKind kind_;
  double lr_;
  int t_ = 0;
  std::vector<double> m_, v_;
};

namespace detail {

inline void require_finite(const NetworkParams& g, const char* what) {
  for (const auto& l : g.layers) {
    for (double w : l.weight)
      if (!std::isfinite(w)) throw NumericalError(std::string(what) + ": non-finite gradient");
    for (double b : l.bias)
      if (!std::isfinite(b)) throw NumericalError(std::string(what) + ": non-finite gradient");
  }
}

}  // namespace detail

/// Splits scenario indices into (train, validation); at least one of each.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double val_fraction, std::uint64_t seed) {
  if (n < 2) throw DataError("need at least two scenarios for a train/validation split");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5b1d));
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(idx[i], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(n))), 1, n - 1);
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

inline Mdp demo_mdp(const GridSpec& spec, int horizon) { return Mdp{spec, 1.0, std::nullopt, horizon}; }

// ---------------------------------------------------------------------------
// Per-scenario losses.

/// d(MSE)/d(cost) per cell, as used by pretraining.
inline Grid<double> regression_cost_gradient(const CostMap& cost, const CostMap& target) {
  Grid<double> g(cost.height(), cost.width());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * (cost[i] - target[i]) / static_cast<double>(g.size());
  return g;
}

/// d(NLL)/d(cost) per cell: the reward is -reward_scale * cost.
inline Grid<double> irl_cost_gradient(const DataTerm& term, double reward_scale) {
  Grid<double> g(term.grad.height(), term.grad.width());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -reward_scale * term.grad[i];
  return g;
}

struct ScenarioGrad {
  double data_loss = 0.0;
  NetworkParams grad;        // data term only
  CostMap cost;
  DataTerm term;             // finetune only
};

/// MEDIRL loss of one scenario and its parameter gradient.
inline ScenarioGrad irl_loss_and_grad(const NetworkParams& params, const OccupancyGrid& grid,
                                      const DemonstrationSet& demos, const TrainConfig& cfg) {
  auto fwd = forward(params, grid);
  const Mdp mdp = demo_mdp(demos.spec(), cfg.horizon);
  ScenarioGrad out;
  out.term = data_loss_and_grad(cost_to_reward(fwd.cost, cfg.reward_scale), demos, mdp);
  out.data_loss = out.term.loss;
  out.grad = backward(fwd.tape, irl_cost_gradient(out.term, cfg.reward_scale)).params;
  out.cost = std::move(fwd.cost);
  return out;
}

inline double irl_nll(const NetworkParams& params, const OccupancyGrid& grid,
                      const DemonstrationSet& demos, const TrainConfig& cfg) {
  const auto cost = forward(params, grid).cost;
  return data_loss_and_grad(cost_to_reward(cost, cfg.reward_scale), demos,
                            demo_mdp(demos.spec(), cfg.horizon))
      .loss;
}

/// Mean demonstration NLL over the selected scenarios.
inline double mean_nll(const NetworkParams& params, std::span<const LabeledScenario> data,
                       std::span<const std::size_t> which, const TrainConfig& cfg) {
  double s = 0.0;
  for (std::size_t i : which) s += irl_nll(params, data[i].scenario.grid, data[i].demos, cfg);
  return s / static_cast<double>(which.size());
}

inline double mean_regression_loss(const NetworkParams& params, std::span<const LabeledScenario> data,
                                   std::span<const std::size_t> which, const ManualRules& rules) {
  double s = 0.0;
  for (std::size_t i : which) {
    const auto& g = data[i].scenario.grid;
    const auto cost = forward(params, g).cost;
    const auto target = manual_cost(g, rules);
    double l = 0.0;
    for (std::size_t j = 0; j < cost.size(); ++j) l += (cost[j] - target[j]) * (cost[j] - target[j]);
    s += l / static_cast<double>(cost.size());
  }
  return s / static_cast<double>(which.size());
}

// ---------------------------------------------------------------------------
// Phases.

struct TrainResult {
  NetworkParams params;
  TrainReport report;
};

/// Regression onto the manual cost map, one update per scenario in index order.
inline TrainResult pretrain(NetworkParams params, std::span<const LabeledScenario> data,
                            std::span<const std::size_t> train, std::span<const std::size_t> val,
                            const TrainConfig& cfg, const ManualRules& rules = {}) {
  cfg.validate();
  rules.validate();
  if (train.empty()) throw DataError("pretrain: no training scenarios");
  std::vector<CostMap> targets(data.size());
  for (std::size_t i : train) targets[i] = manual_cost(data[i].scenario.grid, rules);

  TrainResult r{std::move(params), {}};
  const auto reg = [&](const NetworkParams& p) { return 0.5 * cfg.l2_coeff * p.squared_norm(); };
  const auto val_loss = [&] { return val.empty() ? 0.0 : mean_regression_loss(r.params, data, val, rules); };
  r.report.epochs.push_back({"pretrain", 0, mean_regression_loss(r.params, data, train, rules),
                             val_loss(), reg(r.params), 0.0});
  Optimizer opt(cfg.optimizer, cfg.pretrain_learning_rate, r.params.size());
  for (int epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
    EpochRecord rec{"pretrain", epoch, 0.0, 0.0, 0.0, 0.0};
    for (std::size_t i : train) {
      auto res = regression_loss_and_grad(r.params, data[i].scenario.grid, targets[i]);
      if (!std::isfinite(res.loss)) throw NumericalError("pretrain: non-finite loss");
      res.grad.axpy(cfg.l2_coeff, r.params);
      detail::require_finite(res.grad, "pretrain");
      rec.train_loss += res.loss;
      rec.grad_norm += std::sqrt(res.grad.squared_norm());
      opt.step(r.params, res.grad);
    }
    rec.train_loss /= static_cast<double>(train.size());
    rec.grad_norm /= static_cast<double>(train.size());
    rec.validation_loss = val_loss();
    rec.regularizer = reg(r.params);
    r.report.epochs.push_back(rec);
  }
  r.report.stopping_epoch = r.report.best_epoch = cfg.pretrain_epochs;
  return r;
}

/// MEDIRL fine-tuning with early stopping on validation NLL. Epoch 0 is the
/// incoming parameter set, so the result is never worse on validation than it.
inline TrainResult finetune(NetworkParams params, std::span<const LabeledScenario> data,
                            std::span<const std::size_t> train, std::span<const std::size_t> val,
                            const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty() || val.empty()) throw DataError("finetune: empty train or validation split");
  for (std::size_t i : train)
    if (data[i].demos.size() == 0) throw DataError("finetune: scenario without demonstrations");

  TrainResult r{std::move(params), {}};
  const auto reg = [&](const NetworkParams& p) { return 0.5 * cfg.l2_coeff * p.squared_norm(); };
  double best = mean_nll(r.params, data, val, cfg);
  r.report.epochs.push_back({"finetune", 0, mean_nll(r.params, data, train, cfg), best, reg(r.params), 0.0});
  NetworkParams best_params = r.params;
  int since_best = 0;
  Optimizer opt(cfg.optimizer, cfg.learning_rate, r.params.size());
  for (int epoch = 1; epoch <= cfg.finetune_epochs; ++epoch) {
    EpochRecord rec{"finetune", epoch, 0.0, 0.0, 0.0, 0.0};
    for (std::size_t i : train) {
      auto g = irl_loss_and_grad(r.params, data[i].scenario.grid, data[i].demos, cfg);
      if (!std::isfinite(g.data_loss)) throw NumericalError("finetune: non-finite loss");
      g.grad.axpy(cfg.l2_coeff, r.params);
      detail::require_finite(g.grad, "finetune");
      rec.train_loss += g.data_loss;
      rec.grad_norm += std::sqrt(g.grad.squared_norm());
      opt.step(r.params, g.grad);
    }
    rec.train_loss /= static_cast<double>(train.size());
    rec.grad_norm /= static_cast<double>(train.size());
    rec.validation_loss = mean_nll(r.params, data, val, cfg);
    rec.regularizer = reg(r.params);
    r.report.epochs.push_back(rec);
    r.report.stopping_epoch = epoch;
    log_debug("finetune epoch " + std::to_string(epoch) + " train " + format_double(rec.train_loss) +
              " val " + format_double(rec.validation_loss));
    if (rec.validation_loss < best - cfg.early_stop_min_delta) {
      best = rec.validation_loss;
      best_params = r.params;
      r.report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  r.params = std::move(best_params);
  return r;
}

struct PipelineResult {
  std::optional<NetworkParams> pretrained;
  NetworkParams final_params;
  TrainReport pretrain_report;
  TrainReport finetune_report;
};

/// init -> (pretrain) -> finetune on the labeled training scenarios.
inline PipelineResult run_pipeline(const TrainConfig& cfg, std::span<const LabeledScenario> data,
                                   const ManualRules& rules = {}, const NetConfig& net = {},
                                   std::optional<NetworkParams> init = std::nullopt) {
  cfg.validate();
  const auto [train, val] = split_indices(data.size(), cfg.val_fraction, cfg.seed);
  NetworkParams params = init ? *init : init_params(derive_seed(cfg.seed, 0x1a17), net);
  PipelineResult out;
  if (cfg.pretrain && cfg.pretrain_epochs > 0) {
    auto pre = pretrain(std::move(params), data, train, val, cfg, rules);
    params = pre.params;
    out.pretrained = pre.params;
    out.pretrain_report = std::move(pre.report);
  }
  auto ft = finetune(std::move(params), data, train, val, cfg);
  out.final_params = std::move(ft.params);
  out.finetune_report = std::move(ft.report);
  return out;
}

}  // namespace medirl
