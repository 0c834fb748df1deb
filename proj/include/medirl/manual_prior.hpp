#pragma once
// Handcrafted cost: threshold on the per-cell height range, then expand the
// obstacle mask by the vehicle footprint (square / Chebyshev radius).

#include <cstdint>
#include <stdexcept>

#include "medirl/grid.hpp"
#include "medirl/reward_net.hpp"

namespace medirl {

struct ManualRules {
  double height_range_threshold = 0.15;  // meters
  int dilation_radius = 2;               // cells
  double obstacle_cost = 0.9;
  double free_cost = 0.1;

  void validate() const {
    if (!(height_range_threshold > 0.0))
      throw std::invalid_argument("ManualRules: threshold must be > 0");
    if (dilation_radius < 0) throw std::invalid_argument("ManualRules: dilation_radius must be >= 0");
    if (!(obstacle_cost > 0.0 && obstacle_cost <= 1.0))
      throw std::invalid_argument("ManualRules: obstacle_cost must be in (0,1]");
    if (!(free_cost >= 0.0 && free_cost < 1.0))
      throw std::invalid_argument("ManualRules: free_cost must be in [0,1)");
    if (!(free_cost < obstacle_cost))
      throw std::invalid_argument("ManualRules: free_cost must be below obstacle_cost");
  }
};

using Mask = Grid<std::uint8_t>;

inline Mask threshold_obstacles(const OccupancyGrid& input, double threshold) {
  Mask m(input.height(), input.width(), 0);
  for (int y = 0; y < input.height(); ++y)
    for (int x = 0; x < input.width(); ++x)
      m(y, x) = input.height_range(y, x) > threshold ? 1 : 0;
  return m;
}

/// Minkowski sum with the (2r+1)^2 square; separable max filter.
inline Mask dilate(const Mask& in, int radius) {
  const int h = in.height(), w = in.width();
  Mask rows(h, w, 0), out(h, w, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      for (int d = std::max(0, x - radius); d <= std::min(w - 1, x + radius) && !v; ++d) v = in(y, d);
      rows(y, x) = v;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      for (int d = std::max(0, y - radius); d <= std::min(h - 1, y + radius) && !v; ++d) v = rows(d, x);
      out(y, x) = v;
    }
  return out;
}

inline Mask manual_obstacle_mask(const OccupancyGrid& input, const ManualRules& rules) {
  return dilate(threshold_obstacles(input, rules.height_range_threshold), rules.dilation_radius);
}

inline CostMap manual_cost(const OccupancyGrid& input, const ManualRules& rules = {}) {
  rules.validate();
  const Mask mask = manual_obstacle_mask(input, rules);
  CostMap cost(input.height(), input.width());
  for (std::size_t i = 0; i < cost.size(); ++i)
    cost[i] = mask[i] ? rules.obstacle_cost : rules.free_cost;
  return cost;
}

}  // namespace medirl
