#pragma once
// Maximum-entropy trajectory model on the grid MDP: finite-horizon soft value
// iteration (backward pass), expected state visitation (forward pass), the
// demonstration negative log-likelihood and its gradient w.r.t. the reward.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "medirl/common.hpp"
#include "medirl/grid.hpp"
#include "medirl/grid_mdp.hpp"

namespace medirl {

/// Per-cell state reward r(s). -inf marks a structurally blocked cell.
using RewardMap = Grid<double>;
/// Expected (or empirical) visit counts per cell, accumulated over time.
using VisitationMap = Grid<double>;

/// Time-indexed soft values. Row t covers the state at trajectory index t.
struct SoftValues {
  int horizon = 0;
  std::size_t cells = 0;
  std::vector<double> v;  // horizon x cells
  std::vector<double> q;  // horizon x cells x actions

  [[nodiscard]] double value(int t, std::size_t s) const {
    return v[static_cast<std::size_t>(t) * cells + s];
  }
  [[nodiscard]] double action_value(int t, std::size_t s, Action a) const {
    return q[(static_cast<std::size_t>(t) * cells + s) * kNumActions + static_cast<std::size_t>(a)];
  }
};

struct Policy {
  int horizon = 0;
  std::size_t cells = 0;
  std::vector<double> prob;      // horizon x cells x actions
  std::vector<double> log_prob;  // same layout, -inf where prob is 0

  [[nodiscard]] std::size_t offset(int t, std::size_t s) const {
    return (static_cast<std::size_t>(t) * cells + s) * kNumActions;
  }
  [[nodiscard]] double operator()(int t, std::size_t s, Action a) const {
    return prob[offset(t, s) + static_cast<std::size_t>(a)];
  }
  [[nodiscard]] double log(int t, std::size_t s, Action a) const {
    return log_prob[offset(t, s) + static_cast<std::size_t>(a)];
  }
};

struct MaxEntSolution {
  SoftValues values;
  Policy policy;
};

namespace detail {

/// neighbours[s * 9 + a] = successor index or -1 for an off-grid move.
inline std::vector<std::int32_t> neighbour_table(const GridSpec& spec) {
  std::vector<std::int32_t> table(spec.cells() * kNumActions, -1);
  for (std::size_t s = 0; s < spec.cells(); ++s) {
    const Cell c = spec.cell(s);
    for (Action a : kAllActions)
      if (auto n = transition(c, a, spec))
        table[s * kNumActions + static_cast<std::size_t>(a)] =
            static_cast<std::int32_t>(spec.index(*n));
  }
  return table;
}

inline void check_reward(const RewardMap& reward, const GridSpec& spec) {
  if (!reward.same_shape(spec)) throw std::invalid_argument("reward shape does not match grid");
  for (double r : reward)
    if (std::isnan(r) || r == std::numeric_limits<double>::infinity())
      throw NumericalError("reward contains NaN or +inf");
}

}  // namespace detail

/// Backward recursion q[t][s][a] = r(s) + gamma * v[t+1][T(s,a)],
/// v[t][s] = logsumexp_a q[t][s][a], pi = exp(q - v).
/// The goal is terminal: v = 0 there and only Stay is available. Without a goal
/// every trajectory runs the full horizon and the last state collects r(s).
inline MaxEntSolution soft_value_iteration(const RewardMap& reward, const Mdp& mdp) {
  mdp.validate();
  detail::check_reward(reward, mdp.spec);

  const std::size_t n = mdp.spec.cells();
  const int horizon = mdp.horizon;
  const auto nbr = detail::neighbour_table(mdp.spec);
  const std::size_t goal = mdp.goal ? mdp.spec.index(*mdp.goal) : n;
  constexpr auto kStay = static_cast<std::size_t>(Action::Stay);

  MaxEntSolution out;
  SoftValues& sv = out.values;
  sv.horizon = horizon;
  sv.cells = n;
  sv.v.assign(static_cast<std::size_t>(horizon) * n, kNegInf);
  sv.q.assign(static_cast<std::size_t>(horizon) * n * kNumActions, kNegInf);

  for (int t = horizon - 1; t >= 0; --t) {
    const bool last = t == horizon - 1;
    double* v_t = sv.v.data() + static_cast<std::size_t>(t) * n;
    const double* v_next = last ? nullptr : sv.v.data() + static_cast<std::size_t>(t + 1) * n;
    for (std::size_t s = 0; s < n; ++s) {
      double* q = sv.q.data() + (static_cast<std::size_t>(t) * n + s) * kNumActions;
      if (s == goal) {
        q[kStay] = 0.0;
        v_t[s] = 0.0;
        continue;
      }
      const double r = reward[s];
      if (last) {
        if (!mdp.goal) {
          q[kStay] = r;
          v_t[s] = r;
        }
        continue;
      }
      if (r == kNegInf) continue;
      double m = kNegInf;
      for (std::size_t a = 0; a < kNumActions; ++a) {
        const std::int32_t next = nbr[s * kNumActions + a];
        if (next < 0) continue;
        const double vn = v_next[next];
        if (vn == kNegInf) continue;
        q[a] = r + mdp.gamma * vn;
        m = std::max(m, q[a]);
      }
      if (m == kNegInf) continue;
      double acc = 0.0;
      for (std::size_t a = 0; a < kNumActions; ++a)
        if (q[a] != kNegInf) acc += std::exp(q[a] - m);
      v_t[s] = m + std::log(acc);
    }
  }

  Policy& pi = out.policy;
  pi.horizon = horizon;
  pi.cells = n;
  pi.prob.assign(sv.q.size(), 0.0);
  pi.log_prob.assign(sv.q.size(), kNegInf);
  for (int t = 0; t < horizon; ++t) {
    for (std::size_t s = 0; s < n; ++s) {
      const double v = sv.v[static_cast<std::size_t>(t) * n + s];
      if (v == kNegInf) continue;
      const std::size_t base = (static_cast<std::size_t>(t) * n + s) * kNumActions;
      for (std::size_t a = 0; a < kNumActions; ++a) {
        const double q = sv.q[base + a];
        if (q == kNegInf) continue;
        pi.log_prob[base + a] = q - v;
        pi.prob[base + a] = std::exp(q - v);
      }
    }
  }
  return out;
}

/// Forward pass: d[0][start] = 1, d[t+1][s'] = sum d[t][s] pi_t(a|s) over T(s,a) = s'.
/// Mass reaching the goal is counted once and then leaves the system.
inline VisitationMap expected_svf(const Policy& policy, const Mdp& mdp, Cell start) {
  if (!mdp.spec.contains(start)) throw std::out_of_range("expected_svf: start out of bounds");
  if (policy.cells != mdp.spec.cells() || policy.horizon != mdp.horizon)
    throw std::invalid_argument("expected_svf: policy does not match mdp");

  const std::size_t n = mdp.spec.cells();
  const auto nbr = detail::neighbour_table(mdp.spec);
  const std::size_t goal = mdp.goal ? mdp.spec.index(*mdp.goal) : n;

  VisitationMap mu(mdp.spec, 0.0);
  std::vector<double> cur(n, 0.0), next(n, 0.0);
  cur[mdp.spec.index(start)] = 1.0;
  for (int t = 0; t < mdp.horizon; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    bool any = false;
    for (std::size_t s = 0; s < n; ++s) {
      const double d = cur[s];
      if (d == 0.0) continue;
      mu[s] += d;
      if (s == goal || t + 1 == mdp.horizon) continue;
      const std::size_t base = policy.offset(t, s);
      for (std::size_t a = 0; a < kNumActions; ++a) {
        const double p = policy.prob[base + a];
        if (p == 0.0) continue;
        next[static_cast<std::size_t>(nbr[s * kNumActions + a])] += d * p;
        any = true;
      }
    }
    if (!any) break;
    std::swap(cur, next);
  }
  return mu;
}

/// Mean per-demonstration visit counts.
inline VisitationMap demo_svf(const DemonstrationSet& demos, const GridSpec& spec) {
  VisitationMap mu(spec, 0.0);
  const double w = 1.0 / static_cast<double>(demos.size());
  for (const auto& t : demos)
    for (const auto& s : t.steps) mu[s.state] += w;
  return mu;
}

/// log P(traj) = sum_t log pi_t(a_t | s_t) for a trajectory starting at t = 0.
/// With a goal the trajectory must end there and visit it only once.
inline double trajectory_log_prob(const Policy& policy, const Mdp& mdp, const Trajectory& traj) {
  const auto& steps = traj.steps;
  if (steps.empty() || steps.size() > static_cast<std::size_t>(mdp.horizon)) return kNegInf;
  if (mdp.goal) {
    if (steps.back().state != *mdp.goal) return kNegInf;
  } else if (steps.size() != static_cast<std::size_t>(mdp.horizon)) {
    return kNegInf;
  }
  double lp = 0.0;
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    const Step& st = steps[i];
    if (mdp.is_goal(st.state)) return kNegInf;
    const auto next = mdp.step(st.state, st.action);
    if (!next || *next != steps[i + 1].state) return kNegInf;
    lp += policy.log(static_cast<int>(i), mdp.spec.index(st.state), st.action);
  }
  return lp;
}

struct DataTerm {
  double loss = 0.0;               // -(1/N) sum_i log P(traj_i | r)
  Grid<double> grad;               // d loss / d r = -(mu_demo - mu_expected)
  VisitationMap mu_demo;
  VisitationMap mu_expected;
  std::vector<double> log_probs;   // per demonstration
};

/// Negative log-likelihood of the demonstrations and its reward gradient. Each
/// demonstration is solved with its own start and with its final state as goal.
inline DataTerm data_loss_and_grad(const RewardMap& reward, const DemonstrationSet& demos,
                                   const Mdp& mdp) {
  const GridSpec& spec = mdp.spec;
  DataTerm out;
  out.mu_demo = demo_svf(demos, spec);
  out.mu_expected = VisitationMap(spec, 0.0);
  out.log_probs.reserve(demos.size());
  const double w = 1.0 / static_cast<double>(demos.size());

  double nll = 0.0;
  for (std::size_t i = 0; i < demos.size(); ++i) {
    const Trajectory& traj = demos[i];
    Mdp m = mdp;
    m.goal = traj.back();
    if (traj.size() > static_cast<std::size_t>(m.horizon))
      throw DataError("demonstration " + std::to_string(i) + " is longer than the horizon");
    const auto sol = soft_value_iteration(reward, m);
    const double lp = trajectory_log_prob(sol.policy, m, traj);
    if (!std::isfinite(lp))
      throw DataError("demonstration " + std::to_string(i) +
                      " has zero probability under the current reward");
    out.log_probs.push_back(lp);
    nll -= w * lp;
    const auto mu = expected_svf(sol.policy, m, traj.front());
    for (std::size_t s = 0; s < spec.cells(); ++s) out.mu_expected[s] += w * mu[s];
  }
  out.loss = nll;
  out.grad = Grid<double>(spec, 0.0);
  for (std::size_t s = 0; s < spec.cells(); ++s)
    out.grad[s] = -(out.mu_demo[s] - out.mu_expected[s]);
  return out;
}

/// Rollouts of the policy from `start` until goal absorption or the horizon.
/// The final step of every rollout carries Action::Stay.
inline DemonstrationSet sample_trajectories(const Policy& policy, const Mdp& mdp, Cell start,
                                            std::size_t count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample_trajectories: count must be >= 1");
  if (!mdp.spec.contains(start)) throw std::out_of_range("sample_trajectories: start out of bounds");
  Rng rng(seed);
  std::vector<Trajectory> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Trajectory traj;
    Cell state = start;
    for (int t = 0;; ++t) {
      if (mdp.is_goal(state) || t + 1 == mdp.horizon) {
        traj.steps.push_back({state, Action::Stay});
        break;
      }
      const std::size_t base = policy.offset(t, mdp.spec.index(state));
      double total = 0.0;
      for (std::size_t a = 0; a < kNumActions; ++a) total += policy.prob[base + a];
      if (total <= 0.0)
        throw DataError("sample_trajectories: no feasible action (goal unreachable)");
      const double u = rng.uniform() * total;
      double acc = 0.0;
      std::size_t chosen = kNumActions;
      for (std::size_t a = 0; a < kNumActions; ++a) {
        const double p = policy.prob[base + a];
        if (p == 0.0) continue;
        acc += p;
        chosen = a;
        if (u < acc) break;
      }
      const auto action = static_cast<Action>(chosen);
      traj.steps.push_back({state, action});
      state = *mdp.step(state, action);
    }
    out.push_back(std::move(traj));
  }
  return {mdp.spec, std::move(out)};
}

}  // namespace medirl
