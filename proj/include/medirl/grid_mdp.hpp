#pragma once
// Deterministic 8-connected grid MDP, trajectories and the trajectory text format.

#include <array>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "medirl/common.hpp"
#include "medirl/grid.hpp"

namespace medirl {

enum class Action : int { N = 0, NE, E, SE, S, SW, W, NW, Stay };

inline constexpr int kNumActions = 9;

inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::N, Action::NE, Action::E, Action::SE, Action::S,
    Action::SW, Action::W, Action::NW, Action::Stay};

struct Offset {
  int dy;
  int dx;
};

constexpr Offset offset(Action a) {
  constexpr std::array<Offset, kNumActions> kOffsets = {{
      {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {0, 0}}};
  return kOffsets[static_cast<std::size_t>(a)];
}

constexpr Action reverse(Action a) {
  if (a == Action::Stay) return a;
  return static_cast<Action>((static_cast<int>(a) + 4) % 8);
}

/// Action moving from `from` to the 8-neighbour (or same cell) `to`, if any.
constexpr std::optional<Action> action_between(Cell from, Cell to) {
  const int dy = to.y - from.y;
  const int dx = to.x - from.x;
  for (Action a : kAllActions) {
    const Offset o = offset(a);
    if (o.dy == dy && o.dx == dx) return a;
  }
  return std::nullopt;
}

/// Grid-level transition. Off-grid moves are invalid (never clamped).
inline std::optional<Cell> transition(Cell state, Action action, const GridSpec& spec) {
  const Offset o = offset(action);
  const Cell next{state.y + o.dy, state.x + o.dx};
  if (!spec.contains(next)) return std::nullopt;
  return next;
}

struct Mdp {
  GridSpec spec;
  double gamma = 1.0;
  std::optional<Cell> goal;  // absorbing terminal
  int horizon = 26;          // max trajectory length in steps (states)

  void validate() const {
    spec.validate();
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("Mdp: gamma must be in (0,1]");
    if (horizon < 1) throw std::invalid_argument("Mdp: horizon must be >= 1");
    if (goal && !spec.contains(*goal)) throw std::invalid_argument("Mdp: goal out of bounds");
  }

  [[nodiscard]] bool is_goal(Cell c) const { return goal && *goal == c; }

  /// MDP transition: the goal absorbs every action.
  [[nodiscard]] std::optional<Cell> step(Cell state, Action action) const {
    if (is_goal(state)) return state;
    return transition(state, action, spec);
  }
};

struct Step {
  Cell state;
  Action action = Action::Stay;

  friend bool operator==(const Step&, const Step&) = default;
};

/// Ordered (state, action) pairs. The visited states are exactly the step states;
/// the action on the final step is not followed.
struct Trajectory {
  std::vector<Step> steps;

  [[nodiscard]] std::size_t size() const { return steps.size(); }
  [[nodiscard]] Cell front() const { return steps.front().state; }
  [[nodiscard]] Cell back() const { return steps.back().state; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Builds a trajectory through consecutive 8-neighbour cells, ending with Stay.
inline Trajectory trajectory_from_cells(const std::vector<Cell>& cells) {
  Trajectory t;
  t.steps.reserve(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    Action a = Action::Stay;
    if (i + 1 < cells.size()) {
      auto between = action_between(cells[i], cells[i + 1]);
      if (!between) throw std::invalid_argument("trajectory_from_cells: cells not adjacent");
      a = *between;
    }
    t.steps.push_back({cells[i], a});
  }
  return t;
}

class DemonstrationSet {
 public:
  DemonstrationSet(GridSpec spec, std::vector<Trajectory> trajectories)
      : spec_(spec), trajectories_(std::move(trajectories)) {
    if (trajectories_.empty()) throw std::invalid_argument("DemonstrationSet: empty");
    for (const auto& t : trajectories_) {
      if (t.steps.empty()) throw std::invalid_argument("DemonstrationSet: empty trajectory");
      for (const auto& s : t.steps)
        if (!spec_.contains(s.state))
          throw std::invalid_argument("DemonstrationSet: state out of bounds");
    }
  }

  [[nodiscard]] const GridSpec& spec() const { return spec_; }
  [[nodiscard]] const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  [[nodiscard]] std::size_t size() const { return trajectories_.size(); }
  const Trajectory& operator[](std::size_t i) const { return trajectories_[i]; }
  auto begin() const { return trajectories_.begin(); }
  auto end() const { return trajectories_.end(); }

  [[nodiscard]] std::size_t total_steps() const {
    std::size_t n = 0;
    for (const auto& t : trajectories_) n += t.size();
    return n;
  }

  friend bool operator==(const DemonstrationSet&, const DemonstrationSet&) = default;

 private:
  GridSpec spec_;
  std::vector<Trajectory> trajectories_;
};

inline bool validate_trajectory(const Trajectory& traj, const Mdp& mdp) {
  const auto& steps = traj.steps;
  if (steps.empty() || steps.size() > static_cast<std::size_t>(mdp.horizon)) return false;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!mdp.spec.contains(steps[i].state)) return false;
    const auto next = mdp.step(steps[i].state, steps[i].action);
    if (!next) return false;
    if (i + 1 < steps.size() && *next != steps[i + 1].state) return false;
  }
  return true;
}

/// Splits every trajectory into consecutive segments of at most max_len steps.
inline DemonstrationSet crop_trajectories(const DemonstrationSet& demos, std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("crop_trajectories: max_len must be >= 1");
  std::vector<Trajectory> out;
  for (const auto& t : demos) {
    for (std::size_t begin = 0; begin < t.size(); begin += max_len) {
      const std::size_t end = std::min(t.size(), begin + max_len);
      Trajectory seg;
      seg.steps.assign(t.steps.begin() + static_cast<std::ptrdiff_t>(begin),
                       t.steps.begin() + static_cast<std::ptrdiff_t>(end));
      out.push_back(std::move(seg));
    }
  }
  return {demos.spec(), std::move(out)};
}

// Text format: "#grid H W cell_size" header, then one trajectory per line as
// "y0,x0,a0;y1,x1,a1;..." with the action encoded 0-8.

inline void write_trajectories(std::ostream& os, const DemonstrationSet& demos) {
  const auto& spec = demos.spec();
  os << "#grid " << spec.height << ' ' << spec.width << ' ' << format_double(spec.cell_size)
     << '\n';
  for (const auto& t : demos) {
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const auto& s = t.steps[i];
      if (i) os << ';';
      os << s.state.y << ',' << s.state.x << ',' << static_cast<int>(s.action);
    }
    os << '\n';
  }
}

inline DemonstrationSet read_trajectories(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("trajectory file: missing header");
  std::istringstream header(line);
  std::string tag, h, w, cs;
  header >> tag >> h >> w >> cs;
  if (tag != "#grid" || cs.empty()) throw DataError("trajectory file: bad header '" + line + "'");
  GridSpec spec{parse_int<int>(h), parse_int<int>(w), parse_double(cs)};
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("trajectory file: ") + e.what());
  }

  std::vector<Trajectory> trajs;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Trajectory t;
    std::string_view rest(line);
    while (!rest.empty()) {
      const auto semi = rest.find(';');
      const std::string_view item = rest.substr(0, semi);
      rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
      const auto c1 = item.find(',');
      const auto c2 = item.find(',', c1 == std::string_view::npos ? c1 : c1 + 1);
      if (c1 == std::string_view::npos || c2 == std::string_view::npos)
        throw DataError("trajectory file: malformed step '" + std::string(item) + "'");
      const int y = parse_int<int>(item.substr(0, c1));
      const int x = parse_int<int>(item.substr(c1 + 1, c2 - c1 - 1));
      const int a = parse_int<int>(item.substr(c2 + 1));
      if (a < 0 || a >= kNumActions) throw DataError("trajectory file: action out of range");
      if (!spec.contains({y, x})) throw DataError("trajectory file: state out of bounds");
      t.steps.push_back({{y, x}, static_cast<Action>(a)});
    }
    trajs.push_back(std::move(t));
  }
  if (trajs.empty()) throw DataError("trajectory file: no trajectories");
  return {spec, std::move(trajs)};
}

}  // namespace medirl
