#pragma once
// Synthetic urban scenes: occupancy features with ground-truth traversability,
// distance-dependent LIDAR sparsity, MaxEnt demonstrators and collision paths.

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "medirl/common.hpp"
#include "medirl/grid.hpp"
#include "medirl/grid_mdp.hpp"
#include "medirl/manual_prior.hpp"
#include "medirl/maxent_solver.hpp"
#include "medirl/reward_net.hpp"

namespace medirl {

enum class FeatureKind : int { Bollard = 0, Grass, Slope, Stairs, Underpass, Wall };

inline constexpr int kNumFeatureKinds = 6;

inline constexpr std::array<const char*, kNumFeatureKinds> kFeatureNames = {
    "bollard", "grass", "slope", "stairs", "underpass", "wall"};

inline const char* feature_name(FeatureKind k) { return kFeatureNames[static_cast<std::size_t>(k)]; }

inline FeatureKind parse_feature_kind(std::string_view s) {
  for (int k = 0; k < kNumFeatureKinds; ++k)
    if (s == kFeatureNames[static_cast<std::size_t>(k)]) return static_cast<FeatureKind>(k);
  throw DataError("unknown feature kind '" + std::string(s) + "'");
}

/// Observation and ground-truth signature of each feature kind.
struct FeatureSignature {
  double height_range;  // meters, before distance attenuation
  double mean_height;   // meters; slopes and stairs add a per-column rise
  bool traversable;
  double truth_cost;
};

inline constexpr FeatureSignature signature(FeatureKind k) {
  switch (k) {
    case FeatureKind::Bollard: return {1.0, 0.5, false, 0.95};
    case FeatureKind::Grass: return {0.05, 0.03, false, 0.8};
    case FeatureKind::Slope: return {0.2, 0.1, true, 0.2};
    case FeatureKind::Stairs: return {0.12, 0.06, false, 0.9};
    case FeatureKind::Underpass: return {2.5, 1.25, true, 0.15};
    case FeatureKind::Wall: return {2.0, 1.0, false, 1.0};
  }
  return {0.0, 0.0, true, 0.1};
}

inline constexpr double kPavementCost = 0.1;
/// Truth obstacle ring around a bollard (cells).
inline constexpr int kBollardTruthRadius = 1;
/// Minimum Chebyshev distance between footprints of different features.
inline constexpr int kFeatureGap = 3;
inline constexpr int kVehicleClearance = 3;
/// Behaviour cost of traversable cells next to walls and bollards.
inline constexpr double kClearanceCost = 0.3;
inline constexpr int kClearanceRadius = 1;

/// Normalized point count at Chebyshev distance d from the vehicle.
inline double point_count_at(int d) { return std::max(0.1, 1.0 / (1.0 + 0.15 * d)); }

/// Multiplicative height-range attenuation for a cell with normalized point count pc.
inline double range_attenuation(double pc) { return 0.8 + 0.2 * pc; }

struct Feature {
  FeatureKind kind = FeatureKind::Wall;
  std::vector<Cell> footprint;
  double rise = 0.0;  // per-column mean-height increase (slope, stairs)

  friend bool operator==(const Feature&, const Feature&) = default;
};

/// Number of features of each kind, indexed by FeatureKind.
using FeatureMix = std::array<int, kNumFeatureKinds>;

inline constexpr FeatureMix kOneOfEachKind = {1, 1, 1, 1, 1, 1};

struct Scenario {
  GridSpec spec;
  OccupancyGrid grid;
  Mask truth;               // 1 = traversable
  Grid<double> truth_cost;  // < 0.5 traversable, >= 0.5 untraversable
  Cell vehicle_pos;
  std::vector<Feature> features;
  std::uint64_t seed = 0;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Mask of the footprints of the given kind.
inline Mask footprint_mask(const Scenario& sc, FeatureKind kind) {
  Mask m(sc.spec, 0);
  for (const auto& f : sc.features)
    if (f.kind == kind)
      for (Cell c : f.footprint) m[c] = 1;
  return m;
}

namespace detail {

inline std::vector<Cell> feature_shape(FeatureKind kind, Rng& rng) {
  int h = 1, w = 1;
  switch (kind) {
    case FeatureKind::Bollard: break;
    case FeatureKind::Grass: h = rng.uniform_int(3, 5); w = rng.uniform_int(3, 6); break;
    case FeatureKind::Slope: h = rng.uniform_int(3, 5); w = rng.uniform_int(3, 5); break;
    case FeatureKind::Stairs: h = rng.uniform_int(3, 4); w = rng.uniform_int(2, 4); break;
    case FeatureKind::Underpass: h = rng.uniform_int(3, 4); w = rng.uniform_int(3, 5); break;
    case FeatureKind::Wall:
      if (rng.uniform() < 0.5) {
        h = 1;
        w = rng.uniform_int(5, 10);
      } else {
        h = rng.uniform_int(5, 10);
        w = 1;
      }
      break;
  }
  std::vector<Cell> cells;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) cells.push_back({y, x});
  return cells;
}

}  // namespace detail

/// Places the requested features at random, renders the observation channels and
/// ground truth. Throws DataError when placement fails after bounded retries.
inline Scenario generate_scenario(std::uint64_t seed, const GridSpec& spec, const FeatureMix& mix) {
  spec.validate();
  Rng rng(seed);
  Scenario sc;
  sc.spec = spec;
  sc.seed = seed;
  sc.vehicle_pos = {spec.height / 2, std::min(2, spec.width - 1)};

  // Largest first so that small features fill the gaps.
  constexpr std::array<FeatureKind, kNumFeatureKinds> kOrder = {
      FeatureKind::Wall, FeatureKind::Grass, FeatureKind::Slope,
      FeatureKind::Underpass, FeatureKind::Stairs, FeatureKind::Bollard};
  Grid<int> occupied(spec, 0);  // feature footprints, for the gap test

  for (FeatureKind kind : kOrder) {
    for (int n = 0; n < mix[static_cast<std::size_t>(kind)]; ++n) {
      bool placed = false;
      for (int attempt = 0; attempt < 400 && !placed; ++attempt) {
        auto shape = detail::feature_shape(kind, rng);
        int sh = 0, sw = 0;
        for (Cell c : shape) {
          sh = std::max(sh, c.y + 1);
          sw = std::max(sw, c.x + 1);
        }
        if (sh > spec.height || sw > spec.width) continue;
        const Cell origin{rng.uniform_int(0, spec.height - sh), rng.uniform_int(0, spec.width - sw)};
        bool ok = true;
        for (Cell& c : shape) {
          c = {c.y + origin.y, c.x + origin.x};
          if (chebyshev(c, sc.vehicle_pos) < kVehicleClearance) ok = false;
        }
        if (!ok) continue;
        const int gap = kFeatureGap + (kind == FeatureKind::Bollard ? kBollardTruthRadius : 0);
        for (Cell c : shape) {
          for (int y = std::max(0, c.y - gap); y <= std::min(spec.height - 1, c.y + gap) && ok; ++y)
            for (int x = std::max(0, c.x - gap); x <= std::min(spec.width - 1, c.x + gap) && ok; ++x)
              if (occupied(y, x)) ok = false;
          if (!ok) break;
        }
        if (!ok) continue;
        Feature f{kind, std::move(shape), 0.0};
        if (kind == FeatureKind::Slope) f.rise = signature(kind).height_range;
        if (kind == FeatureKind::Stairs) f.rise = 0.15;
        for (Cell c : f.footprint) {
          occupied[c] = 1;
          // bollard truth ring counts as occupied for later gap tests
          if (kind == FeatureKind::Bollard)
            for (int y = c.y - kBollardTruthRadius; y <= c.y + kBollardTruthRadius; ++y)
              for (int x = c.x - kBollardTruthRadius; x <= c.x + kBollardTruthRadius; ++x)
                if (spec.contains({y, x})) occupied(y, x) = 1;
        }
        sc.features.push_back(std::move(f));
        placed = true;
      }
      if (!placed)
        throw DataError(std::string("generate_scenario: cannot place feature '") +
                        feature_name(kind) + "' (seed " + std::to_string(seed) + ")");
    }
  }

  // True (unattenuated) geometry.
  Grid<double> range(spec, 0.0), mean(spec, 0.0);
  sc.truth = Mask(spec, 1);
  sc.truth_cost = Grid<double>(spec, kPavementCost);
  for (const auto& f : sc.features) {
    const FeatureSignature sig = signature(f.kind);
    int x_min = spec.width;
    for (Cell c : f.footprint) x_min = std::min(x_min, c.x);
    for (Cell c : f.footprint) {
      range[c] = sig.height_range;
      mean[c] = sig.mean_height + f.rise * (c.x - x_min);
      sc.truth[c] = sig.traversable ? 1 : 0;
      sc.truth_cost[c] = sig.truth_cost;
    }
    if (f.kind == FeatureKind::Bollard) {
      for (Cell c : f.footprint)
        for (int y = c.y - kBollardTruthRadius; y <= c.y + kBollardTruthRadius; ++y)
          for (int x = c.x - kBollardTruthRadius; x <= c.x + kBollardTruthRadius; ++x)
            if (spec.contains({y, x}) && sc.truth(y, x)) {
              sc.truth(y, x) = 0;
              sc.truth_cost(y, x) = sig.truth_cost;
            }
    }
  }

  // Drivers keep clearance from solid obstacles: traversable but costlier.
  const Mask solid = [&] {
    Mask m(spec, 0);
    for (const auto& f : sc.features)
      if (f.kind == FeatureKind::Wall || f.kind == FeatureKind::Bollard)
        for (Cell c : f.footprint) m[c] = 1;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (!sc.truth[i] && sc.truth_cost[i] == signature(FeatureKind::Bollard).truth_cost) m[i] = 1;
    return dilate(m, kClearanceRadius);
  }();
  for (std::size_t i = 0; i < solid.size(); ++i)
    if (solid[i] && sc.truth[i]) sc.truth_cost[i] = std::max(sc.truth_cost[i], kClearanceCost);

  sc.grid = OccupancyGrid(spec.height, spec.width);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      const double pc = point_count_at(chebyshev({y, x}, sc.vehicle_pos));
      sc.grid.point_count(y, x) = pc;
      sc.grid.height_range(y, x) = range(y, x) * range_attenuation(pc);
      sc.grid.mean_height(y, x) = mean(y, x);
    }
  return sc;
}

inline Scenario standard_corner_case_scenario(std::uint64_t seed = 7, const GridSpec& spec = {}) {
  return generate_scenario(seed, spec, kOneOfEachKind);
}

/// Random feature mix for training suites: walls and bollards always present,
/// each corner-case kind with probability 1/2.
inline FeatureMix random_mix(Rng& rng) {
  FeatureMix m{};
  m[static_cast<std::size_t>(FeatureKind::Wall)] = rng.uniform_int(1, 2);
  m[static_cast<std::size_t>(FeatureKind::Bollard)] = rng.uniform_int(1, 3);
  for (FeatureKind k : {FeatureKind::Grass, FeatureKind::Slope, FeatureKind::Stairs,
                        FeatureKind::Underpass})
    m[static_cast<std::size_t>(k)] = rng.uniform() < 0.5 ? 1 : 0;
  return m;
}

struct DemoSettings {
  std::size_t count = 6;
  int max_len = 26;          // steps; also the MDP horizon
  double reward_scale = 50;  // reward = -reward_scale * cost
  int min_distance = 4;      // Chebyshev distance between start and goal
  int max_distance = 12;
  int max_attempts = 200;    // per demonstration
};

inline RewardMap cost_to_reward(const Grid<double>& cost, double reward_scale) {
  RewardMap r(cost.height(), cost.width());
  for (std::size_t i = 0; i < cost.size(); ++i) r[i] = -reward_scale * cost[i];
  return r;
}

inline bool avoids_untraversable(const Trajectory& t, const Mask& truth) {
  for (const auto& s : t.steps)
    if (!truth[s.state]) return false;
  return true;
}

/// MaxEnt demonstrator on the ground-truth cost. Trajectories entering
/// untraversable cells are rejected and resampled.
inline DemonstrationSet generate_demos(const Scenario& sc, const DemoSettings& settings,
                                       std::uint64_t seed) {
  if (settings.count < 1) throw std::invalid_argument("generate_demos: count must be >= 1");
  const GridSpec& spec = sc.spec;
  const RewardMap reward = cost_to_reward(sc.truth_cost, settings.reward_scale);
  const int max_d = std::min(settings.max_distance, settings.max_len - 1);

  std::vector<Cell> free_cells;
  for (std::size_t i = 0; i < spec.cells(); ++i)
    if (sc.truth[i]) free_cells.push_back(spec.cell(i));
  if (free_cells.size() < 2) throw DataError("generate_demos: no traversable cells");

  Rng rng(seed);
  std::vector<Trajectory> out;
  for (std::size_t k = 0; k < settings.count; ++k) {
    bool done = false;
    for (int attempt = 0; attempt < settings.max_attempts && !done; ++attempt) {
      const Cell start = free_cells[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(free_cells.size()) - 1))];
      std::vector<Cell> goals;
      for (Cell c : free_cells) {
        const int d = chebyshev(start, c);
        if (d >= settings.min_distance && d <= max_d) goals.push_back(c);
      }
      if (goals.empty()) continue;
      const Cell goal = goals[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(goals.size()) - 1))];
      Mdp mdp{spec, 1.0, goal, settings.max_len};
      const auto sol = soft_value_iteration(reward, mdp);
      if (sol.values.value(0, spec.index(start)) == kNegInf) continue;
      auto sample = sample_trajectories(sol.policy, mdp, start, 1, rng.next());
      if (!avoids_untraversable(sample[0], sc.truth)) continue;
      out.push_back(sample[0]);
      done = true;
    }
    if (!done) throw DataError("generate_demos: no feasible start/goal pair found");
  }
  return crop_trajectories(DemonstrationSet(spec, std::move(out)),
                           static_cast<std::size_t>(settings.max_len));
}

/// Straight 8-connected runs that approach a geometric obstacle (wall or bollard;
/// any untraversable cell if there are none), cross it, and continue a few steps.
inline DemonstrationSet generate_collision_trajectories(const Scenario& sc, std::size_t count,
                                                        std::uint64_t seed) {
  const GridSpec& spec = sc.spec;
  std::vector<Cell> targets;
  for (const auto& f : sc.features)
    if (f.kind == FeatureKind::Wall || f.kind == FeatureKind::Bollard)
      targets.insert(targets.end(), f.footprint.begin(), f.footprint.end());
  if (targets.empty())
    for (std::size_t i = 0; i < spec.cells(); ++i)
      if (!sc.truth[i]) targets.push_back(spec.cell(i));
  if (targets.empty())
    throw std::invalid_argument("generate_collision_trajectories: no untraversable cell");

  Rng rng(seed);
  std::vector<Trajectory> out;
  while (out.size() < count) {
    const Cell target = targets[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(targets.size()) - 1))];
    const int dy = rng.uniform_int(-1, 1), dx = rng.uniform_int(-1, 1);
    if (dy == 0 && dx == 0) continue;
    const int before = rng.uniform_int(3, 6), after = rng.uniform_int(2, 4);
    std::vector<Cell> cells;
    for (int k = -before; k <= after; ++k) {
      const Cell c{target.y + k * dy, target.x + k * dx};
      if (!spec.contains(c)) {
        if (k < 0) {
          cells.clear();
          continue;
        }
        break;
      }
      cells.push_back(c);
    }
    if (cells.size() < 3) continue;
    out.push_back(trajectory_from_cells(cells));
  }
  return {spec, std::move(out)};
}

/// A scenario with its expert demonstrations and collision (negative) trajectories.
struct LabeledScenario {
  Scenario scenario;
  DemonstrationSet demos;
  DemonstrationSet collisions;

  friend bool operator==(const LabeledScenario&, const LabeledScenario&) = default;
};

struct SuiteSettings {
  GridSpec spec;
  std::size_t train_count = 40;
  std::size_t test_count = 10;
  DemoSettings demos;
  std::size_t collisions_per_scenario = 6;
};

/// Scenario `index` of the suite drawn from `master_seed`; train and test
/// scenarios share one index space (test indices follow the train ones).
inline LabeledScenario make_suite_scenario(std::uint64_t master_seed, std::size_t index,
                                           const SuiteSettings& s) {
  const std::uint64_t seed = derive_seed(master_seed, index);
  Rng mix_rng(derive_seed(seed, 0));
  Scenario sc = generate_scenario(seed, s.spec, random_mix(mix_rng));
  auto demos = generate_demos(sc, s.demos, derive_seed(seed, 1));
  auto collisions = generate_collision_trajectories(sc, s.collisions_per_scenario, derive_seed(seed, 2));
  return {std::move(sc), std::move(demos), std::move(collisions)};
}

struct Suite {
  std::vector<LabeledScenario> train;
  std::vector<LabeledScenario> test;
};

inline Suite generate_suite(std::uint64_t master_seed, const SuiteSettings& s) {
  Suite suite;
  for (std::size_t i = 0; i < s.train_count; ++i)
    suite.train.push_back(make_suite_scenario(master_seed, i, s));
  for (std::size_t i = 0; i < s.test_count; ++i)
    suite.test.push_back(make_suite_scenario(master_seed, s.train_count + i, s));
  return suite;
}

// ---------------------------------------------------------------------------
// Scenario text file. Every number is written in shortest round-trip form.

namespace detail {

template <typename T, typename F>
void write_rows(std::ostream& os, const char* name, int h, int w, F&& at) {
  os << name << '\n';
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x) os << ' ';
      if constexpr (std::is_same_v<T, double>)
        os << format_double(at(y, x));
      else
        os << static_cast<int>(at(y, x));
    }
    os << '\n';
  }
}

inline std::vector<std::string> read_tokens_line(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("scenario file: unexpected end of file");
  std::istringstream ss(line);
  std::vector<std::string> toks;
  std::string t;
  while (ss >> t) toks.push_back(t);
  return toks;
}

inline void expect_section(std::istream& is, const std::string& name) {
  auto toks = read_tokens_line(is);
  if (toks.size() != 1 || toks[0] != name) throw DataError("scenario file: expected section " + name);
}

template <typename F>
void read_rows(std::istream& is, int h, int w, F&& set) {
  for (int y = 0; y < h; ++y) {
    auto toks = read_tokens_line(is);
    if (static_cast<int>(toks.size()) != w) throw DataError("scenario file: bad row width");
    for (int x = 0; x < w; ++x) set(y, x, toks[static_cast<std::size_t>(x)]);
  }
}

}  // namespace detail

inline void write_scenario(std::ostream& os, const Scenario& sc) {
  const auto& s = sc.spec;
  os << "#scenario " << s.height << ' ' << s.width << ' ' << format_double(s.cell_size) << ' '
     << sc.seed << ' ' << sc.vehicle_pos.y << ' ' << sc.vehicle_pos.x << '\n';
  os << "features " << sc.features.size() << '\n';
  for (const auto& f : sc.features) {
    os << feature_name(f.kind) << ' ' << format_double(f.rise) << ' ';
    for (std::size_t i = 0; i < f.footprint.size(); ++i)
      os << (i ? ";" : "") << f.footprint[i].y << ',' << f.footprint[i].x;
    os << '\n';
  }
  const auto& g = sc.grid;
  detail::write_rows<double>(os, "mean_height", s.height, s.width,
                             [&](int y, int x) { return g.mean_height(y, x); });
  detail::write_rows<double>(os, "height_range", s.height, s.width,
                             [&](int y, int x) { return g.height_range(y, x); });
  detail::write_rows<double>(os, "point_count", s.height, s.width,
                             [&](int y, int x) { return g.point_count(y, x); });
  detail::write_rows<std::uint8_t>(os, "truth", s.height, s.width,
                                   [&](int y, int x) { return sc.truth(y, x); });
  detail::write_rows<double>(os, "truth_cost", s.height, s.width,
                             [&](int y, int x) { return sc.truth_cost(y, x); });
}

inline Scenario read_scenario(std::istream& is) {
  auto head = detail::read_tokens_line(is);
  if (head.size() != 7 || head[0] != "#scenario") throw DataError("scenario file: bad header");
  Scenario sc;
  sc.spec = {parse_int<int>(head[1]), parse_int<int>(head[2]), parse_double(head[3])};
  try {
    sc.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("scenario file: ") + e.what());
  }
  sc.seed = parse_int<std::uint64_t>(head[4]);
  sc.vehicle_pos = {parse_int<int>(head[5]), parse_int<int>(head[6])};
  auto fl = detail::read_tokens_line(is);
  if (fl.size() != 2 || fl[0] != "features") throw DataError("scenario file: missing features");
  const auto nf = parse_int<std::size_t>(fl[1]);
  for (std::size_t i = 0; i < nf; ++i) {
    auto toks = detail::read_tokens_line(is);
    if (toks.size() != 3) throw DataError("scenario file: bad feature line");
    Feature f{parse_feature_kind(toks[0]), {}, parse_double(toks[1])};
    std::string_view rest(toks[2]);
    while (!rest.empty()) {
      const auto semi = rest.find(';');
      const auto item = rest.substr(0, semi);
      rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
      const auto comma = item.find(',');
      if (comma == std::string_view::npos) throw DataError("scenario file: bad footprint");
      const Cell c{parse_int<int>(item.substr(0, comma)), parse_int<int>(item.substr(comma + 1))};
      if (!sc.spec.contains(c)) throw DataError("scenario file: footprint out of bounds");
      f.footprint.push_back(c);
    }
    sc.features.push_back(std::move(f));
  }
  const int h = sc.spec.height, w = sc.spec.width;
  sc.grid = OccupancyGrid(h, w);
  sc.truth = Mask(sc.spec, 0);
  sc.truth_cost = Grid<double>(sc.spec, 0.0);
  detail::expect_section(is, "mean_height");
  detail::read_rows(is, h, w, [&](int y, int x, const std::string& t) { sc.grid.mean_height(y, x) = parse_double(t); });
  detail::expect_section(is, "height_range");
  detail::read_rows(is, h, w, [&](int y, int x, const std::string& t) { sc.grid.height_range(y, x) = parse_double(t); });
  detail::expect_section(is, "point_count");
  detail::read_rows(is, h, w, [&](int y, int x, const std::string& t) { sc.grid.point_count(y, x) = parse_double(t); });
  detail::expect_section(is, "truth");
  detail::read_rows(is, h, w, [&](int y, int x, const std::string& t) {
    const int v = parse_int<int>(t);
    if (v != 0 && v != 1) throw DataError("scenario file: truth must be 0/1");
    sc.truth(y, x) = static_cast<std::uint8_t>(v);
  });
  detail::expect_section(is, "truth_cost");
  detail::read_rows(is, h, w, [&](int y, int x, const std::string& t) { sc.truth_cost(y, x) = parse_double(t); });
  return sc;
}

}  // namespace medirl
