#pragma once
// Central-difference gradient checking shared by unit and acceptance tests.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace medirl::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
};

/// Relative error |a - f| / max(|a|, |f|); entries where both are below
/// `floor` must instead agree to `abs_tol` (reported as 0 or +inf).
inline double rel_error(double analytic, double numeric, double floor = 1e-7,
                        double abs_tol = 1e-9) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale > floor) return std::abs(analytic - numeric) / scale;
  return std::abs(analytic - numeric) < abs_tol ? 0.0 : INFINITY;
}

/// Compares `analytic` against central differences of `loss` over `x`.
inline GradCheck check_gradient(std::vector<double> x, std::span<const double> analytic,
                                const std::function<double(const std::vector<double>&)>& loss,
                                double eps = 1e-5) {
  GradCheck out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double lp = loss(x);
    x[i] = orig - eps;
    const double lm = loss(x);
    x[i] = orig;
    const double err = rel_error(analytic[i], (lp - lm) / (2 * eps));
    if (err > out.max_rel_error || std::isnan(err)) {
      out.max_rel_error = std::isnan(err) ? INFINITY : err;
      out.worst_index = i;
    }
    ++out.checked;
  }
  return out;
}

}  // namespace medirl::testing
