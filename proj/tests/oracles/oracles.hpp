// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations used only by tests. None of them calls into the
// solver code they check; they share nothing but the task and cost types.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "gridsched/task_model.hpp"

namespace oracle {

using gridsched::CostFunction;
using gridsched::DemandTask;

// ---------------------------------------------------------------------------
// Preemptive relaxation on a uniform time grid, solved by FISTA with exact
// projection onto {0 <= x <= 1, sum x = s/dt} per task.

struct GridSolution {
  double objective;
  double max_load;
  std::vector<double> load;  // per cell
};

// Euclidean projection of v onto {x in [0,1]^n, sum x = mass}: x = clamp(v - theta).
// g(theta) = sum clamp(v - theta) is piecewise linear and nonincreasing, so
// Newton steps inside a shrinking bracket terminate in a few passes.
inline void project_capped_simplex(std::vector<double>& v, double mass, double& theta) {
  double lo = *std::min_element(v.begin(), v.end()) - 1.0;  // g(lo) = n >= mass
  double hi = *std::max_element(v.begin(), v.end());        // g(hi) = 0 <= mass
  if (!(theta > lo && theta < hi)) theta = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double g = -mass;
    std::size_t interior = 0;
    for (double x : v) {
      const double y = x - theta;
      if (y >= 1.0) {
        g += 1.0;
      } else if (y > 0.0) {
        g += y;
        ++interior;
      }
    }
    if (std::abs(g) <= 1e-13 * std::max(1.0, mass)) break;
    (g > 0 ? lo : hi) = theta;
    const double newton = interior ? theta + g / static_cast<double>(interior) : lo - 1.0;
    theta = (newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
    if (hi - lo < 1e-15) break;
  }
  for (double& x : v) x = std::clamp(x - theta, 0.0, 1.0);
}

// Quadratic costs only: the gradient must be Lipschitz.
inline GridSolution preemptive_grid_oracle(std::span<const DemandTask> tasks, double c2, double c1, double c0,
                                           double horizon, double dt = 0.01, int iterations = 20000) {
  const auto cells = static_cast<std::size_t>(std::llround(horizon / dt));
  struct Var {
    std::size_t first, count;
    double power, mass;
  };
  std::vector<Var> vars;
  double sum_p2 = 0.0;
  for (const auto& t : tasks) {
    const auto first = static_cast<std::size_t>(std::llround(t.arrival() / dt));
    const auto last = static_cast<std::size_t>(std::llround(t.deadline() / dt));
    vars.push_back({first, last - first, t.power(), t.duration() / dt});
    sum_p2 += t.power() * t.power();
  }
  // f(x) = dt * sum_c C(l_c),  grad_{n,c} = dt * p_n * C'(l_c)
  const double lipschitz = 2.0 * c2 * dt * sum_p2 + 1e-12;
  const double step = 1.0 / lipschitz;

  std::vector<std::vector<double>> x(vars.size()), y(vars.size()), prev(vars.size());
  for (std::size_t n = 0; n < vars.size(); ++n) x[n].assign(vars[n].count, vars[n].mass / static_cast<double>(vars[n].count));
  y = x;
  std::vector<double> load(cells);
  auto fill_load = [&](const std::vector<std::vector<double>>& z) {
    std::fill(load.begin(), load.end(), 0.0);
    for (std::size_t n = 0; n < vars.size(); ++n)
      for (std::size_t k = 0; k < vars[n].count; ++k) load[vars[n].first + k] += vars[n].power * z[n][k];
  };
  auto objective = [&](const std::vector<std::vector<double>>& z) {
    fill_load(z);
    double f = 0.0;
    for (double l : load) f += dt * (c2 * l * l + c1 * l + c0);
    return f;
  };

  double tk = 1.0;
  double best = objective(x);
  double checkpoint = best;
  std::vector<double> theta(vars.size(), 0.0);
  for (int it = 0; it < iterations; ++it) {
    fill_load(y);
    prev = x;
    for (std::size_t n = 0; n < vars.size(); ++n) {
      std::vector<double> v = y[n];
      for (std::size_t k = 0; k < vars[n].count; ++k) {
        const double l = load[vars[n].first + k];
        v[k] -= step * dt * vars[n].power * (2.0 * c2 * l + c1);
      }
      project_capped_simplex(v, vars[n].mass, theta[n]);
      x[n] = std::move(v);
    }
    const double f = objective(x);
    if (it % 500 == 499) {
      if (checkpoint - std::min(best, f) <= 1e-12 * std::abs(checkpoint)) break;
      checkpoint = std::min(best, f);
    }
    if (f > best) {  // adaptive restart
      tk = 1.0;
      y = x;
    } else {
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
      for (std::size_t n = 0; n < vars.size(); ++n)
        for (std::size_t k = 0; k < vars[n].count; ++k) y[n][k] = x[n][k] + (tk - 1.0) / tn * (x[n][k] - prev[n][k]);
      tk = tn;
    }
    best = std::min(best, f);
  }
  GridSolution out{objective(x), 0.0, {}};
  out.max_load = *std::max_element(load.begin(), load.end());
  out.load = load;
  return out;
}

// ---------------------------------------------------------------------------
// Bin packing by enumerating every set partition of the items (restricted
// growth strings), pruned only by capacity.

inline std::size_t min_bins_by_partition(std::span<const double> sizes, double capacity) {
  const std::size_t n = sizes.size();
  if (n == 0) return 0;
  std::vector<double> load;
  std::size_t best = std::numeric_limits<std::size_t>::max();
  std::function<void(std::size_t)> go = [&](std::size_t i) {
    if (i == n) {
      best = std::min(best, load.size());
      return;
    }
    for (std::size_t b = 0; b < load.size(); ++b) {
      if (load[b] + sizes[i] <= capacity + 1e-9) {
        load[b] += sizes[i];
        go(i + 1);
        load[b] -= sizes[i];
      }
    }
    if (sizes[i] <= capacity + 1e-9) {
      load.push_back(sizes[i]);
      go(i + 1);
      load.pop_back();
    }
  };
  go(0);
  return best;
}

// ---------------------------------------------------------------------------
// Non-preemptive start times by full enumeration of the product grid.

struct StartSolution {
  std::vector<double> starts;
  double objective;
};

inline std::vector<double> start_grid(const DemandTask& t, double grid) {
  std::vector<double> out;
  const double latest = t.deadline() - t.duration();
  for (int k = 0;; ++k) {
    const double s = t.arrival() + k * grid;
    if (s > latest + 1e-9 * grid) break;
    out.push_back(std::min(s, latest));
  }
  if (latest - out.back() > 1e-9 * grid) out.push_back(latest);
  return out;
}

// Cost of rectangles evaluated on the union of all endpoints.
inline double rectangles_cost(std::span<const DemandTask> tasks, std::span<const double> starts, const CostFunction& c,
                              double horizon) {
  std::vector<double> times{0.0, horizon};
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    times.push_back(starts[i]);
    times.push_back(starts[i] + tasks[i].duration());
  }
  std::sort(times.begin(), times.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double a = times[k], b = times[k + 1];
    if (b <= a) continue;
    const double mid = 0.5 * (a + b);
    double l = 0.0;
    for (std::size_t i = 0; i < tasks.size(); ++i)
      if (starts[i] <= mid && mid < starts[i] + tasks[i].duration()) l += tasks[i].power();
    total += (b - a) * c(l);
  }
  return total;
}

inline StartSolution brute_force_starts(std::span<const DemandTask> tasks, const CostFunction& c, double horizon,
                                        double grid) {
  std::vector<std::vector<double>> choices;
  for (const auto& t : tasks) choices.push_back(start_grid(t, grid));
  StartSolution best{{}, std::numeric_limits<double>::infinity()};
  std::vector<double> cur(tasks.size());
  std::function<void(std::size_t)> go = [&](std::size_t i) {
    if (i == tasks.size()) {
      const double f = rectangles_cost(tasks, cur, c, horizon);
      // Enumeration is lexicographic, so only a strict improvement replaces.
      if (f < best.objective - 1e-9 * std::max(1.0, std::abs(f))) best = {cur, f};
      return;
    }
    for (double s : choices[i]) {
      cur[i] = s;
      go(i + 1);
    }
  };
  go(0);
  return best;
}

// ---------------------------------------------------------------------------
// Queueing closed forms.

inline double poisson_pmf(double mean, unsigned i) {
  double logp = -mean;
  for (unsigned k = 1; k <= i; ++k) logp += std::log(mean / k);
  return std::exp(logp);
}

// M/M/c busy-server cost summed directly from the birth-death balance equations.
inline double mmc_cost_direct(double lambda, double s, unsigned c, const CostFunction& cost) {
  std::vector<double> w{1.0};
  double z = 1.0;
  for (unsigned i = 1; i < 20000; ++i) {
    const double rate = s * std::min(i, c);
    w.push_back(w.back() * lambda / rate);
    z += w.back();
    if (i > c && w.back() < 1e-18 * z) break;
  }
  double v = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) v += w[i] / z * cost(std::min<double>(static_cast<double>(i), c));
  return v;
}

}  // namespace oracle
