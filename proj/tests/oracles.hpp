#pragma once

// Test-only oracles, kept independent of the implementation paths they check.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dgnet/tensor.hpp"

namespace oracle {

// Central finite difference d f / d theta[i] at step h.
inline double central_diff(std::function<double()> f, double* slot, double h) {
  const double saved = *slot;
  *slot = saved + h;
  const double fp = f();
  *slot = saved - h;
  const double fm = f();
  *slot = saved;
  return (fp - fm) / (2.0 * h);
}

struct GradCheckStats {
  std::size_t total = 0;
  std::size_t within_tight = 0;  // coordinates with error <= tight tolerance
  double worst = 0.0;            // largest relative-or-absolute error seen
};

// Compares analytic gradient `grad` against finite differences of `eval`,
// perturbing `theta` in place. Error metric: |a - f| / max(|f|, floor).
inline GradCheckStats gradcheck(std::function<double()> eval, dgnet::Tensor& theta,
                                const dgnet::Tensor& grad, double h, double tight,
                                double floor = 1e-6) {
  GradCheckStats stats;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double fd = central_diff(eval, &theta[i], h);
    const double err = std::abs(grad[i] - fd) / std::max(std::abs(fd), floor);
    stats.total += 1;
    if (err <= tight) stats.within_tight += 1;
    stats.worst = std::max(stats.worst, err);
  }
  return stats;
}

// Brute-force scalar recomputation of mean |a - b| with an explicit loop.
inline double l1_mean_loop(const dgnet::Tensor& a, const dgnet::Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::fabs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

// Naive textbook edit distance via plain recursion (exponential; short strings
// only). Independent of the DP implementation under test.
inline std::size_t edit_distance_recursive(const std::vector<std::uint32_t>& a, std::size_t i,
                                           const std::vector<std::uint32_t>& b, std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  if (a[i] == b[j]) return edit_distance_recursive(a, i + 1, b, j + 1);
  const std::size_t del = edit_distance_recursive(a, i + 1, b, j);
  const std::size_t ins = edit_distance_recursive(a, i, b, j + 1);
  const std::size_t sub = edit_distance_recursive(a, i + 1, b, j + 1);
  return 1 + std::min(del, std::min(ins, sub));
}

}  // namespace oracle
