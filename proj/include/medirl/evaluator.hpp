#pragma once
// Held-out metrics (NLL, modified Hausdorff distance), trajectory classification
// with precision-recall sweeps, three-way comparison reports and cost-map images.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <set>
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

struct EvalSettings {
  double reward_scale = 50;
  int horizon = 26;
  std::size_t mhd_samples = 10;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(reward_scale > 0) || !std::isfinite(reward_scale)) throw ConfigError("reward_scale must be positive");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (mhd_samples < 1) throw ConfigError("mhd_samples must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Point-set distances

/// Distinct cells visited by a trajectory, sorted.
inline std::vector<Cell> visited_cells(const Trajectory& t) {
  std::set<Cell> s;
  for (const auto& st : t.steps) s.insert(st.state);
  return {s.begin(), s.end()};
}

/// mean over a in A of min over b in B of |a - b|.
inline double directed_mhd(std::span<const Cell> a, std::span<const Cell> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("directed_mhd: empty point set");
  double total = 0.0;
  for (Cell p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (Cell q : b) best = std::min(best, std::hypot(double(p.y - q.y), double(p.x - q.x)));
    total += best;
  }
  return total / static_cast<double>(a.size());
}

inline double mhd(std::span<const Cell> a, std::span<const Cell> b) {
  return std::max(directed_mhd(a, b), directed_mhd(b, a));
}

// ---------------------------------------------------------------------------
// Likelihood metrics

/// Mean -log P(demo | r = -reward_scale * cost) over the demonstrations.
inline double eval_nll(const CostMap& cost, const DemonstrationSet& demos, const EvalSettings& s) {
  const Mdp mdp{demos.spec(), 1.0, std::nullopt, s.horizon};
  return data_loss_and_grad(cost_to_reward(cost, s.reward_scale), demos, mdp).loss;
}

/// Mean over demonstrations of MHD(demo cells, union of cells of n policy
/// samples between the demo's endpoints), in cell units.
inline double eval_mhd(const CostMap& cost, const DemonstrationSet& demos, const EvalSettings& s) {
  if (s.mhd_samples < 1) throw std::invalid_argument("eval_mhd: need at least one sample");
  const RewardMap reward = cost_to_reward(cost, s.reward_scale);
  double total = 0.0;
  for (std::size_t i = 0; i < demos.size(); ++i) {
    const Trajectory& demo = demos[i];
    const Mdp mdp{demos.spec(), 1.0, demo.back(), s.horizon};
    const auto sol = soft_value_iteration(reward, mdp);
    const auto samples = sample_trajectories(sol.policy, mdp, demo.front(), s.mhd_samples,
                                             derive_seed(s.seed, i));
    std::set<Cell> pts;
    for (const auto& t : samples)
      for (const auto& st : t.steps) pts.insert(st.state);
    const std::vector<Cell> b(pts.begin(), pts.end());
    total += mhd(visited_cells(demo), b);
  }
  return total / static_cast<double>(demos.size());
}

// ---------------------------------------------------------------------------
// Classification

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  /// 1 when nothing is classified traversable.
  [[nodiscard]] double precision() const { return tp + fp == 0 ? 1.0 : double(tp) / double(tp + fp); }
  [[nodiscard]] double recall() const { return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn); }
};

/// A trajectory's score is the highest cost along it.
inline double trajectory_score(const CostMap& cost, const Trajectory& t) {
  double m = 0.0;
  for (const auto& st : t.steps) m = std::max(m, cost[st.state]);
  return m;
}

/// Scores of positive (expert) and negative (collision) trajectories, possibly
/// pooled across scenarios with their own cost maps.
struct ScoredTrajectories {
  std::vector<double> positive;
  std::vector<double> negative;

  void add(const CostMap& cost, const DemonstrationSet& pos, const DemonstrationSet& neg) {
    for (const auto& t : pos) positive.push_back(trajectory_score(cost, t));
    for (const auto& t : neg) negative.push_back(trajectory_score(cost, t));
  }
};

/// Traversable iff score < t.
inline Confusion classify_scores(const ScoredTrajectories& s, double t) {
  Confusion c;
  for (double v : s.positive) (v < t ? c.tp : c.fn)++;
  for (double v : s.negative) (v < t ? c.fp : c.tn)++;
  return c;
}

inline Confusion classify_trajectories(const CostMap& cost, const DemonstrationSet& positives,
                                       const DemonstrationSet& negatives, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("classify_trajectories: threshold outside [0,1]");
  ScoredTrajectories s;
  s.add(cost, positives, negatives);
  return classify_scores(s, t);
}

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  Confusion counts;

  /// Neither everything rejected nor everything accepted.
  [[nodiscard]] bool nontrivial() const {
    return counts.tp + counts.fp > 0 && counts.tn + counts.fn > 0;
  }

  friend bool operator==(const PrPoint& a, const PrPoint& b) {
    return a.threshold == b.threshold && a.precision == b.precision && a.recall == b.recall;
  }
};

struct PrCurve {
  std::vector<PrPoint> points;  // thresholds strictly increasing
  double auc = 0.0;

  /// Distinct nontrivial (precision, recall) pairs in sweep order. A two-valued
  /// cost map has exactly one.
  [[nodiscard]] std::vector<PrPoint> operating_points() const {
    std::vector<PrPoint> out;
    for (const auto& p : points)
      if (p.nontrivial() && std::none_of(out.begin(), out.end(), [&](const PrPoint& q) {
            return q.precision == p.precision && q.recall == p.recall;
          }))
        out.push_back(p);
    return out;
  }

  /// Interpolated precision: best precision among points with recall >= r.
  [[nodiscard]] double precision_at_recall(double r) const {
    double best = 0.0;
    for (const auto& p : points)
      if (p.recall >= r) best = std::max(best, p.precision);
    return best;
  }

  /// Largest recall among points with precision >= p (0 if none).
  [[nodiscard]] double max_recall_at_precision(double p) const {
    double best = 0.0;
    for (const auto& q : points)
      if (q.precision >= p) best = std::max(best, q.recall);
    return best;
  }
};

/// Area under the precision-recall step curve: trapezoids between operating
/// points ordered by recall (then by decreasing precision).
inline double pr_auc(std::vector<PrPoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const PrPoint& a, const PrPoint& b) {
    return a.recall != b.recall ? a.recall < b.recall : a.precision > b.precision;
  });
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].recall - pts[i - 1].recall) * 0.5 * (pts[i].precision + pts[i - 1].precision);
  return area;
}

inline PrCurve pr_sweep(const ScoredTrajectories& s, std::span<const double> thresholds) {
  if (thresholds.size() < 2) throw std::invalid_argument("pr_sweep: need at least two thresholds");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1]))
      throw std::invalid_argument("pr_sweep: thresholds must be strictly increasing");
  PrCurve c;
  for (double t : thresholds) {
    const auto conf = classify_scores(s, t);
    c.points.push_back({t, conf.precision(), conf.recall(), conf});
  }
  c.auc = pr_auc(c.points);
  return c;
}

inline PrCurve pr_sweep(const CostMap& cost, const DemonstrationSet& positives,
                        const DemonstrationSet& negatives, std::span<const double> thresholds) {
  ScoredTrajectories s;
  s.add(cost, positives, negatives);
  return pr_sweep(s, thresholds);
}

/// {0, 1} plus the smallest threshold above each distinct score inside (0, 1):
/// every distinct operating point of the max-cost classifier, exactly once.
inline std::vector<double> score_thresholds(const ScoredTrajectories& s) {
  std::set<double> t{0.0, 1.0};
  for (const auto* v : {&s.positive, &s.negative})
    for (double x : *v) {
      const double above = std::nextafter(x, 2.0);
      if (above > 0.0 && above < 1.0) t.insert(above);
    }
  return {t.begin(), t.end()};
}

// ---------------------------------------------------------------------------
// Comparison across cost sources

struct ScenarioMetrics {
  double nll = 0.0;
  double mhd = 0.0;
};

struct MetricReport {
  std::string name;
  double nll = 0.0;  // mean per-scenario NLL (each itself a per-trajectory mean)
  double mhd = 0.0;
  std::vector<ScenarioMetrics> per_scenario;
  PrCurve pr;
};

/// Evaluates per-scenario cost maps against the labeled test scenarios.
inline MetricReport evaluate_costs(std::string name, std::span<const CostMap> costs,
                                   std::span<const LabeledScenario> test, const EvalSettings& s) {
  s.validate();
  if (costs.size() != test.size() || test.empty())
    throw std::invalid_argument("evaluate_costs: one cost map per test scenario required");
  MetricReport r;
  r.name = std::move(name);
  ScoredTrajectories scores;
  for (std::size_t i = 0; i < test.size(); ++i) {
    EvalSettings si = s;
    si.seed = derive_seed(s.seed, i);
    ScenarioMetrics m{eval_nll(costs[i], test[i].demos, si), eval_mhd(costs[i], test[i].demos, si)};
    r.nll += m.nll;
    r.mhd += m.mhd;
    r.per_scenario.push_back(m);
    scores.add(costs[i], test[i].demos, test[i].collisions);
  }
  r.nll /= static_cast<double>(test.size());
  r.mhd /= static_cast<double>(test.size());
  r.pr = pr_sweep(scores, score_thresholds(scores));
  return r;
}

inline std::vector<CostMap> manual_costs(std::span<const LabeledScenario> data, const ManualRules& rules) {
  std::vector<CostMap> out;
  for (const auto& l : data) out.push_back(manual_cost(l.scenario.grid, rules));
  return out;
}

inline std::vector<CostMap> network_costs(const NetworkParams& p, std::span<const LabeledScenario> data) {
  std::vector<CostMap> out;
  for (const auto& l : data) out.push_back(forward(p, l.scenario.grid).cost);
  return out;
}

struct ComparisonReport {
  std::vector<MetricReport> rows;  // manual, wo_pretrain, w_pretrain
};

inline constexpr std::array<const char*, 3> kReportRows = {"manual", "wo_pretrain", "w_pretrain"};

inline ComparisonReport compare_report(const ManualRules& rules, const NetworkParams& wo_pretrain,
                                       const NetworkParams& w_pretrain,
                                       std::span<const LabeledScenario> test, const EvalSettings& s) {
  ComparisonReport r;
  r.rows.push_back(evaluate_costs(kReportRows[0], manual_costs(test, rules), test, s));
  r.rows.push_back(evaluate_costs(kReportRows[1], network_costs(wo_pretrain, test), test, s));
  r.rows.push_back(evaluate_costs(kReportRows[2], network_costs(w_pretrain, test), test, s));
  return r;
}

/// Metric table. The reference columns hold published real-data values for the
/// same three rows; they are context only and not comparable in absolute terms.
inline void write_metrics_csv(std::ostream& os, const ComparisonReport& r) {
  static constexpr const char* kRefNll[] = {"56.402", "47.535", "46.767"};
  static constexpr const char* kRefMhd[] = {"0.286", "0.218", "0.182"};
  os << "source,nll,mhd,pr_auc,operating_points,reference_nll,reference_mhd\n";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    os << row.name << ',' << format_double(row.nll) << ',' << format_double(row.mhd) << ','
       << format_double(row.pr.auc) << ',';
    const auto ops = row.pr.operating_points();
    for (std::size_t k = 0; k < ops.size(); ++k)
      os << (k ? ";" : "") << format_double(ops[k].precision) << ':' << format_double(ops[k].recall);
    os << ',' << (i < 3 ? kRefNll[i] : "") << ',' << (i < 3 ? kRefMhd[i] : "") << '\n';
  }
}

inline void write_pr_csv(std::ostream& os, const ComparisonReport& r) {
  os << "source,threshold,precision,recall\n";
  for (const auto& row : r.rows)
    for (const auto& p : row.pr.points)
      os << row.name << ',' << format_double(p.threshold) << ',' << format_double(p.precision) << ','
         << format_double(p.recall) << '\n';
}

inline void write_per_scenario_csv(std::ostream& os, const ComparisonReport& r) {
  os << "source,scenario,nll,mhd\n";
  for (const auto& row : r.rows)
    for (std::size_t i = 0; i < row.per_scenario.size(); ++i)
      os << row.name << ',' << i << ',' << format_double(row.per_scenario[i].nll) << ','
         << format_double(row.per_scenario[i].mhd) << '\n';
}

// ---------------------------------------------------------------------------
// Images (plain-text PGM/PPM). Cost 1 is blue, cost 0 is yellow.

inline int to_byte(double v) { return static_cast<int>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))); }

inline void write_ppm(std::ostream& os, const CostMap& cost) {
  os << "P3\n" << cost.width() << ' ' << cost.height() << "\n255\n";
  for (int y = 0; y < cost.height(); ++y) {
    for (int x = 0; x < cost.width(); ++x) {
      const int warm = to_byte(1.0 - cost(y, x));
      os << (x ? " " : "") << warm << ' ' << warm << ' ' << to_byte(cost(y, x));
    }
    os << '\n';
  }
}

/// Grayscale: traversable (low cost) is bright.
inline void write_pgm(std::ostream& os, const CostMap& cost) {
  os << "P2\n" << cost.width() << ' ' << cost.height() << "\n255\n";
  for (int y = 0; y < cost.height(); ++y) {
    for (int x = 0; x < cost.width(); ++x) os << (x ? " " : "") << to_byte(1.0 - cost(y, x));
    os << '\n';
  }
}

/// One scenario per corner-case kind; walls are added so every map has a
/// correctly handled obstacle for contrast.
inline std::vector<std::pair<std::string, Scenario>> corner_case_set(std::uint64_t seed,
                                                                     const GridSpec& spec = {}) {
  std::vector<std::pair<std::string, Scenario>> out;
  for (FeatureKind k : {FeatureKind::Stairs, FeatureKind::Bollard, FeatureKind::Grass,
                        FeatureKind::Underpass, FeatureKind::Slope}) {
    FeatureMix mix{};
    mix[static_cast<std::size_t>(k)] = 1;
    if (k != FeatureKind::Bollard) mix[static_cast<std::size_t>(FeatureKind::Wall)] = 1;
    out.emplace_back(feature_name(k), generate_scenario(derive_seed(seed, out.size()), spec, mix));
  }
  return out;
}

}  // namespace medirl
