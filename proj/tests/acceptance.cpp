// Acceptance gate: runs every criterion at its stated tolerance and prints one
// PASS/FAIL line each. Exit status is nonzero if any criterion fails.
//
//   acceptance            all criteria
//   acceptance 1 4 9      a subset

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "grad_check.hpp"
#include "medirl/config.hpp"
#include "medirl/evaluator.hpp"
#include "medirl/maxent_solver.hpp"
#include "medirl/trainer.hpp"
#include "medirl/world_sim.hpp"
#include "oracle.hpp"

using namespace medirl;
using medirl::testing::check_gradient;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

RewardMap random_reward(const GridSpec& spec, Rng& rng) {
  RewardMap r(spec);
  for (double& v : r) v = rng.uniform(-2.0, 0.0);
  return r;
}

// ---------------------------------------------------------------------------
// 1. Solver against exhaustive enumeration

Outcome maxent_oracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst_p = 0.0, worst_mu = 0.0;
  std::size_t paths = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const GridSpec spec{rng.uniform_int(2, 5), rng.uniform_int(2, 5), 1.0};
    const int horizon = rng.uniform_int(2, 8);
    const auto reward = random_reward(spec, rng);
    const Cell start{rng.uniform_int(0, spec.height - 1), rng.uniform_int(0, spec.width - 1)};
    Cell goal = start;
    while (goal == start || chebyshev(start, goal) > horizon - 1)
      goal = {rng.uniform_int(0, spec.height - 1), rng.uniform_int(0, spec.width - 1)};
    const Mdp mdp{spec, 1.0, goal, horizon};
    const auto sol = soft_value_iteration(reward, mdp);
    const auto en = oracle::enumerate(reward, spec, start, goal, horizon);
    for (std::size_t i = 0; i < en.paths.size(); ++i)
      worst_p = std::max(worst_p, std::abs(std::exp(trajectory_log_prob(sol.policy, mdp, en.paths[i].traj)) -
                                           en.prob[i]));
    const auto mu = expected_svf(sol.policy, mdp, start);
    for (std::size_t s = 0; s < spec.cells(); ++s)
      worst_mu = std::max(worst_mu, std::abs(mu[s] - en.expected_counts[s]));
    paths += en.paths.size();
  }
  const double t = seconds_since(t0);
  return {worst_p <= 1e-9 && worst_mu <= 1e-9 && t < 10,
          fmt("%zu paths; max |dP| %.2e, max |dE[mu]| %.2e (tol 1e-9); %.2fs (< 10s)", paths, worst_p, worst_mu, t)};
}

// ---------------------------------------------------------------------------
// 2. Reward gradient against finite differences of the NLL

Outcome reward_gradient() {
  const auto t0 = Clock::now();
  Rng rng(202);
  const GridSpec spec{6, 6, 1.0};
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto reward = random_reward(spec, rng);
    const int horizon = 8;
    std::vector<Trajectory> demos;
    for (int k = 0; k < 3; ++k) {
      const Cell start{rng.uniform_int(0, 5), rng.uniform_int(0, 5)};
      Cell goal = start;
      while (goal == start) goal = {rng.uniform_int(0, 5), rng.uniform_int(0, 5)};
      const Mdp m{spec, 1.0, goal, horizon};
      const auto sol = soft_value_iteration(reward, m);
      demos.push_back(sample_trajectories(sol.policy, m, start, 1, rng.next())[0]);
    }
    const DemonstrationSet set(spec, demos);
    const Mdp mdp = demo_mdp(spec, horizon);
    const auto term = data_loss_and_grad(reward, set, mdp);
    const auto res = check_gradient(
        std::vector<double>(reward.begin(), reward.end()), std::span<const double>(term.grad.begin(), term.grad.end()),
        [&](const std::vector<double>& x) {
          RewardMap r(spec);
          std::copy(x.begin(), x.end(), r.begin());
          return data_loss_and_grad(r, set, mdp).loss;
        },
        1e-5);
    worst = std::max(worst, res.max_rel_error);
  }
  const double t = seconds_since(t0);
  return {worst < 1e-4 && t < 30, fmt("20 instances 6x6; max rel error %.2e (< 1e-4); %.2fs (< 30s)", worst, t)};
}

// ---------------------------------------------------------------------------
// 3. Network gradients

Tensor3 random_tensor(int c, int h, int w, Rng& rng) {
  Tensor3 t(c, h, w);
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

double dot(const Tensor3& a, const Tensor3& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

Outcome network_gradient() {
  const auto t0 = Clock::now();
  Rng rng(303);
  std::map<std::string, double> worst;
  const auto note = [&](const std::string& k, double e) { worst[k] = std::max(worst[k], e); };
  const auto with = [](const Tensor3& base, const std::vector<double>& v) {
    Tensor3 t = base;
    t.data = v;
    return t;
  };

  for (ConvShape shape : {ConvShape{3, 8, 5}, ConvShape{8, 8, 3}, ConvShape{16, 1, 1}}) {
    ConvParams p(shape);
    for (double& w : p.weight) w = rng.uniform(-0.5, 0.5);
    for (double& b : p.bias) b = rng.uniform(-0.5, 0.5);
    const auto x = random_tensor(shape.in, 8, 8, rng), c = random_tensor(shape.out, 8, 8, rng);
    ConvParams g(shape);
    const auto gx = layers::conv2d_backward(x, p, c, g);
    const std::string k = fmt("conv%d", shape.kernel);
    note(k, check_gradient(x.data, gx.data, [&](const auto& v) { return dot(layers::conv2d(with(x, v), p), c); })
                .max_rel_error);
    note(k, check_gradient(p.weight, g.weight, [&](const auto& w) {
              ConvParams q = p;
              q.weight = w;
              return dot(layers::conv2d(x, q), c);
            }).max_rel_error);
    note(k, check_gradient(p.bias, g.bias, [&](const auto& b) {
              ConvParams q = p;
              q.bias = b;
              return dot(layers::conv2d(x, q), c);
            }).max_rel_error);
  }

  const auto x = random_tensor(3, 8, 8, rng);
  {
    const auto c = random_tensor(3, 8, 8, rng);
    Tensor3 out = x;
    layers::sigmoid_inplace(out);
    note("sigmoid", check_gradient(x.data, layers::sigmoid_backward(out, c).data, [&](const auto& v) {
                      Tensor3 t = with(x, v);
                      layers::sigmoid_inplace(t);
                      return dot(t, c);
                    }).max_rel_error);
  }
  {
    const auto c = random_tensor(3, 4, 4, rng);
    const auto pooled = layers::maxpool2(x);
    note("maxpool", check_gradient(x.data, layers::maxpool2_backward(c, pooled.argmax, 3, 8, 8).data,
                                   [&](const auto& v) { return dot(layers::maxpool2(with(x, v)).out, c); })
                        .max_rel_error);
  }
  {
    const auto c = random_tensor(3, 16, 16, rng);
    note("upsample", check_gradient(x.data, layers::upsample2_backward(c).data,
                                    [&](const auto& v) { return dot(layers::upsample2(with(x, v)), c); })
                         .max_rel_error);
  }
  {
    const auto y = random_tensor(2, 8, 8, rng), c = random_tensor(5, 8, 8, rng);
    note("concat", check_gradient(x.data, layers::split(c, 3).first.data,
                                  [&](const auto& v) { return dot(layers::concat(with(x, v), y), c); })
                       .max_rel_error);
  }
  for (int trial = 0; trial < 3; ++trial) {
    const auto params = init_params(rng.next());
    OccupancyGrid in(8, 8);
    for (int y = 0; y < 8; ++y)
      for (int xx = 0; xx < 8; ++xx) {
        in.mean_height(y, xx) = rng.uniform(-0.5, 1.5);
        in.height_range(y, xx) = rng.uniform(0.0, 2.0);
        in.point_count(y, xx) = rng.uniform(0.1, 1.0);
      }
    CostMap target(8, 8);
    for (double& t : target) t = rng.uniform();
    const auto r = regression_loss_and_grad(params, in, target);
    note("end_to_end", check_gradient(params.flatten(), r.grad.flatten(), [&](const auto& flat) {
                         return regression_loss_and_grad(NetworkParams::unflatten(params.config, flat), in, target)
                             .loss;
                       }).max_rel_error);
  }

  const double t = seconds_since(t0);
  bool ok = t < 30;
  std::string d;
  for (const auto& [k, e] : worst) {
    ok &= e < 1e-4;
    d += fmt("%s %.1e, ", k.c_str(), e);
  }
  return {ok, d + fmt("(< 1e-4); %.2fs (< 30s)", t)};
}

// ---------------------------------------------------------------------------
// 4. Manual prior failure modes on the one-of-each-kind scenario

Outcome manual_signature() {
  const auto t0 = Clock::now();
  const ManualRules rules;
  const auto sc = standard_corner_case_scenario();
  const auto thresholded = threshold_obstacles(sc.grid, rules.height_range_threshold);
  const auto manual = manual_obstacle_mask(sc.grid, rules);
  const auto union_of = [&](FeatureKind a, FeatureKind b) {
    Mask m = footprint_mask(sc, a);
    const auto o = footprint_mask(sc, b);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] |= o[i];
    return m;
  };
  const auto fp_kinds = union_of(FeatureKind::Slope, FeatureKind::Underpass);
  const auto fn_kinds = union_of(FeatureKind::Stairs, FeatureKind::Grass);
  std::size_t fp = 0, fp_feature = 0, fp_ring = 0, fn = 0, bad = 0;
  for (std::size_t i = 0; i < sc.spec.cells(); ++i) {
    const bool obstacle = manual[i], traversable = sc.truth[i];
    const bool is_fp = obstacle && traversable, is_fn = !obstacle && !traversable;
    fp += is_fp;
    fn += is_fn;
    if (is_fp && fp_kinds[i]) ++fp_feature;
    else if (is_fp && !thresholded[i]) ++fp_ring;
    else if (is_fp) ++bad;                     // thresholded FP outside slope/underpass
    if (fp_kinds[i] && !is_fp) ++bad;          // every slope/underpass cell is an FP
    if (is_fn != static_cast<bool>(fn_kinds[i])) ++bad;  // FN exactly on stairs/grass
  }
  std::size_t fp_cells = 0, fn_cells = 0;
  for (std::size_t i = 0; i < sc.spec.cells(); ++i) {
    fp_cells += fp_kinds[i];
    fn_cells += fn_kinds[i];
  }
  const double t = seconds_since(t0);
  return {bad == 0 && fp_feature == fp_cells && fn == fn_cells && fp_cells > 0 && fn_cells > 0 && t < 1,
          fmt("FP %zu = %zu slope/underpass + %zu dilation ring; FN %zu = stairs/grass %zu; violations %zu; %.3fs",
              fp, fp_feature, fp_ring, fn, fn_cells, bad, t)};
}

// ---------------------------------------------------------------------------
// 5, 6, 8. Five-seed comparison on the standard suite

struct SeedRun {
  ComparisonReport report;
  int stop_wo = 0, stop_w = 0;
  double reach_epoch = -1;  // first w_pretrain epoch reaching wo_pretrain's best validation NLL
};

struct SuiteRuns {
  std::vector<SeedRun> seeds;
  double seconds = 0.0;
};

const SuiteRuns& suite_runs() {
  static const SuiteRuns runs = [] {
    SuiteRuns out;
    const auto t0 = Clock::now();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      RunConfig cfg;
      cfg.seed = seed;
      const auto suite = generate_suite(seed, cfg.suite_settings());
      auto tc = cfg.train_config();
      tc.pretrain = false;
      const auto wo = run_pipeline(tc, suite.train, cfg.rules, cfg.net());
      tc.pretrain = true;
      const auto w = run_pipeline(tc, suite.train, cfg.rules, cfg.net());
      SeedRun r{compare_report(cfg.rules, wo.final_params, w.final_params, suite.test, cfg.eval_settings()),
                wo.finetune_report.stopping_epoch, w.finetune_report.stopping_epoch};
      const double target = wo.finetune_report.epochs[wo.finetune_report.best_epoch].validation_loss;
      for (const auto& e : w.finetune_report.epochs)
        if (e.validation_loss <= target) {
          r.reach_epoch = e.epoch;
          break;
        }
      std::fprintf(stderr, "  seed %llu: nll %.3f/%.3f/%.3f mhd %.3f/%.3f/%.3f auc %.4f/%.4f stop %d/%d (%.0fs)\n",
                   static_cast<unsigned long long>(seed), r.report.rows[0].nll, r.report.rows[1].nll,
                   r.report.rows[2].nll, r.report.rows[0].mhd, r.report.rows[1].mhd, r.report.rows[2].mhd,
                   r.report.rows[1].pr.auc, r.report.rows[2].pr.auc, r.stop_wo, r.stop_w, seconds_since(t0));
      out.seeds.push_back(std::move(r));
    }
    out.seconds = seconds_since(t0);
    return out;
  }();
  return runs;
}

std::vector<double> per_seed(const std::function<double(const SeedRun&)>& f) {
  std::vector<double> v;
  for (const auto& s : suite_runs().seeds) v.push_back(f(s));
  return v;
}

Outcome table_ordering() {
  const auto& runs = suite_runs();
  double nll[3], mhd[3];
  for (int k = 0; k < 3; ++k) {
    nll[k] = median(per_seed([k](const SeedRun& s) { return s.report.rows[k].nll; }));
    mhd[k] = median(per_seed([k](const SeedRun& s) { return s.report.rows[k].mhd; }));
  }
  const bool ok = nll[2] <= nll[1] && nll[1] < nll[0] && mhd[2] <= mhd[1] && mhd[1] < mhd[0] &&
                  runs.seconds < 15 * 60;
  return {ok, fmt("median NLL w %.4f <= wo %.4f < manual %.4f; MHD w %.4f <= wo %.4f < manual %.4f; "
                  "5-seed suite %.0fs (< 900s)",
                  nll[2], nll[1], nll[0], mhd[2], mhd[1], mhd[0], runs.seconds)};
}

Outcome pr_comparison() {
  const auto auc_wo = median(per_seed([](const SeedRun& s) { return s.report.rows[1].pr.auc; }));
  const auto auc_w = median(per_seed([](const SeedRun& s) { return s.report.rows[2].pr.auc; }));
  std::size_t safe = 0, n = 0;
  std::string pts;
  for (const auto& s : suite_runs().seeds) {
    const auto ops = s.report.rows[0].pr.operating_points();
    if (ops.size() != 1) {
      pts += "manual map has " + std::to_string(ops.size()) + " operating points; ";
      ++n;
      continue;
    }
    const auto m = ops[0];
    bool ok = true;
    for (int k = 1; k <= 2; ++k) {
      const auto& c = s.report.rows[k].pr;
      ok &= m.precision >= c.precision_at_recall(m.recall);
      ok &= m.recall < c.max_recall_at_precision(m.precision);
    }
    safe += ok;
    ++n;
    pts += fmt("%.3f:%.3f ", m.precision, m.recall);
  }
  return {auc_w >= auc_wo && safe == n,
          fmt("median PR-AUC w %.4f >= wo %.4f; manual point (P:R) %sis safe-but-conservative on %zu/%zu seeds",
              auc_w, auc_wo, pts.c_str(), safe, n)};
}

Outcome convergence_speed() {
  const auto stop_wo = per_seed([](const SeedRun& s) { return s.stop_wo; });
  const auto stop_w = per_seed([](const SeedRun& s) { return s.stop_w; });
  const auto reach = per_seed([](const SeedRun& s) { return s.reach_epoch; });
  std::string d = "stops wo [";
  for (double v : stop_wo) d += fmt(" %g", v);
  d += " ] w [";
  for (double v : stop_w) d += fmt(" %g", v);
  d += " ]; w reaches wo's best val NLL at epoch [";
  for (double v : reach) d += v < 0 ? std::string(" never") : fmt(" %g", v);
  d += " ]";
  return {median(stop_w) <= median(stop_wo),
          fmt("median early-stop epoch w %g vs wo %g (need w <= wo); ", median(stop_w), median(stop_wo)) + d};
}

// ---------------------------------------------------------------------------
// 7. Dense pretraining feedback against sparse IRL feedback

Outcome gradient_support() {
  const auto t0 = Clock::now();
  RunConfig cfg;
  const auto l = make_suite_scenario(cfg.seed, 0, cfg.suite_settings());
  const auto params = init_params(derive_seed(cfg.seed, 0x1a17), cfg.net());
  const auto tc = cfg.train_config();
  const auto cost = forward(params, l.scenario.grid).cost;
  const auto pre = regression_cost_gradient(cost, manual_cost(l.scenario.grid, cfg.rules));
  std::size_t pre_support = 0;
  for (double g : pre) pre_support += g != 0.0;
  const double pre_frac = static_cast<double>(pre_support) / static_cast<double>(pre.size());

  const auto irl = irl_loss_and_grad(params, l.scenario.grid, l.demos, tc);
  const auto g = irl_cost_gradient(irl.term, tc.reward_scale);
  std::set<Cell> goals;
  for (const auto& d : l.demos) goals.insert(d.back());
  std::size_t support = 0, visited = 0, outside = 0, cancelled_goal = 0, cancelled_other = 0;
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) {
      const std::size_t i = l.scenario.spec.index({y, x});
      const bool in_union = irl.term.mu_demo[i] != 0.0 || irl.term.mu_expected[i] != 0.0;
      // A demo's goal is visited once by the demo and with probability one by
      // the model, so mu_D - E[mu] can cancel there up to rounding.
      const bool nonzero = g[i] != 0.0;
      support += nonzero;
      visited += in_union;
      if (!in_union && g[i] != 0.0) ++outside;
      if (in_union && !nonzero) (goals.count({y, x}) ? cancelled_goal : cancelled_other)++;
    }
  const double t = seconds_since(t0);
  const bool ok = pre_frac >= 0.99 && outside == 0 && cancelled_other == 0 && t < 60;
  return {ok, fmt("pretraining support %.1f%% of cells (>= 99%%); IRL support %zu cells (%.1f%%) vs union(mu_D, E[mu]) "
                  "%zu; %zu nonzero outside the union; %zu zero inside it (%zu at demo goals, %zu elsewhere); %.2fs",
                  100 * pre_frac, support, 100.0 * static_cast<double>(support) / static_cast<double>(g.size()),
                  visited, outside, cancelled_goal + cancelled_other, cancelled_goal, cancelled_other, t)};
}

// ---------------------------------------------------------------------------
// 9. Metric unit checks

Outcome metric_units() {
  const auto t0 = Clock::now();
  const std::vector<Cell> a{{0, 0}, {1, 0}}, b{{0, 1}};
  const double m0 = mhd(a, a);
  const double m5 = mhd(std::vector<Cell>{{0, 0}}, std::vector<Cell>{{3, 4}});
  const double m12 = mhd(a, b);
  const DemonstrationSet two({2, 4, 1.0}, {trajectory_from_cells({{0, 0}, {0, 1}, {0, 2}})});
  EvalSettings es;
  es.horizon = 3;
  es.reward_scale = 1.0;
  const double nll = eval_nll(CostMap(2, 4, 0.5), two, es);
  const ScoredTrajectories s{{0.2, 0.4, 0.7}, {0.3, 0.9}};
  const auto c0 = classify_scores(s, 0.0), c1 = classify_scores(s, 1.0);
  const bool pr_ok = c0.tp + c0.fp == 0 && c0.recall() == 0.0 && c0.precision() == 1.0 && c1.recall() == 1.0 &&
                     c1.precision() == 3.0 / 5.0;
  const double t = seconds_since(t0);
  const bool ok = m0 == 0.0 && std::abs(m5 - 5.0) <= 1e-9 && std::abs(m12 - 1.2071067811865475) <= 1e-9 &&
                  std::abs(nll - std::log(2.0)) <= 1e-9 && pr_ok && t < 1;
  return {ok, fmt("MHD %.10f, %.10f, %.10f; two-path NLL %.10f; PR t=0 (P %.2f, R %.2f), t=1 (P %.2f, R %.2f); %.3fs",
                  m0, m5, m12, nll, c0.precision(), c0.recall(), c1.precision(), c1.recall(), t)};
}

// ---------------------------------------------------------------------------
// 10. Byte-identical reruns through the command-line tool

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MEDIRL_CLI_PATH) + " " + args + " >>" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) {
      std::ifstream is(e.path(), std::ios::binary);
      std::ostringstream ss;
      ss << is.rdbuf();
      out[fs::relative(e.path(), root).generic_string()] = ss.str();
    }
  return out;
}

Outcome determinism() {
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / ("medirl_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path log = root / "cli.log";
  std::map<std::string, std::string> runs[2];
  int failures = 0;
  for (int k = 0; k < 2; ++k) {
    const fs::path run = root / ("run" + std::to_string(k));
    const std::string d = (run / "data").string();
    failures += run_cli("gen --seed 3 --out " + d, log) != 0;
    failures += run_cli("pretrain --seed 3 --data " + d + " --out " + (run / "pre").string(), log) != 0;
    failures += run_cli("train --seed 3 --data " + d + " --init " + (run / "pre/pretrained.params").string() +
                            " --out " + (run / "w").string(),
                        log) != 0;
    failures += run_cli("train --seed 3 --no-pretrain --data " + d + " --out " + (run / "wo").string(), log) != 0;
    failures += run_cli("eval --seed 3 --data " + d + " --wo-pretrain " + (run / "wo/model.params").string() +
                            " --w-pretrain " + (run / "w/model.params").string() + " --out " +
                            (run / "eval").string(),
                        log) != 0;
    runs[k] = snapshot(run);
  }
  std::size_t differing = 0;
  for (const auto& [rel, content] : runs[0]) {
    const auto it = runs[1].find(rel);
    differing += it == runs[1].end() || it->second != content;
  }
  differing += runs[1].size() > runs[0].size() ? runs[1].size() - runs[0].size() : 0;
  const bool has_outputs = runs[0].count("w/model.params") && runs[0].count("eval/metrics.csv") &&
                           runs[0].count("pre/pretrained.params");
  fs::remove_all(root);
  const double t = seconds_since(t0);
  return {failures == 0 && differing == 0 && has_outputs,
          fmt("gen->pretrain->train->eval twice: %zu files, %zu differ, %d command failures; %.0fs", runs[0].size(),
              differing, failures, t)};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "maxent oracle equivalence", maxent_oracle},
      {2, "reward gradient exactness", reward_gradient},
      {3, "network gradient check", network_gradient},
      {4, "manual-prior corner-case signature", manual_signature},
      {5, "metric ordering on the 5-seed suite", table_ordering},
      {6, "precision-recall comparison", pr_comparison},
      {7, "dense vs sparse gradient support", gradient_support},
      {8, "convergence speed", convergence_speed},
      {9, "metric unit checks", metric_units},
      {10, "determinism", determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
