// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#include "gridsched/stochastic_analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>

#include "gridsched/rng.hpp"

namespace gridsched::stochastic {

namespace {

constexpr double kRelativeCostTail = 1e-9;
constexpr std::int64_t kMaxDenominator = 1000;
constexpr std::size_t kMaxQuantumGrid = 4'000'000;

double log_poisson(double mean, std::uint64_t i) {
  if (mean == 0.0) return i == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  const auto x = static_cast<double>(i);
  return x * std::log(mean) - mean - std::lgamma(x + 1.0);
}

// Bound on sum_{i>n} q_i (u0 + u1 i + u2 i^2) for Poisson(mean), given q_n.
// Valid once r = mean/(n+2) < 1, using q_{n+1+j} <= q_{n+1} r^j.
double poisson_tail_bound(double mean, std::uint64_t n, double qn, const std::array<double, 3>& env) {
  const auto m = static_cast<double>(n + 1);
  const double r = mean / (m + 1.0);
  if (r >= 1.0) return std::numeric_limits<double>::infinity();
  const double q1 = qn * mean / m;
  const double s0 = 1.0 / (1.0 - r);
  const double s1 = s0 * s0;
  const double s2 = (1.0 + r) * s1 * s0;
  return q1 * (env[0] * s0 + env[1] * m * s1 + env[2] * m * m * s2);
}

// E[f(N)] for N ~ Poisson(mean), where |f(i)| <= env0 + env1 i + env2 i^2.
template <class F>
double poisson_expectation(double mean, const std::array<double, 3>& env, F&& f) {
  double sum = 0.0;
  for (std::uint64_t i = 0;; ++i) {
    const double q = std::exp(log_poisson(mean, i));
    sum += q * f(i);
    if (static_cast<double>(i) < mean) continue;
    const double mass_tail = poisson_tail_bound(mean, i, q, {1.0, 0.0, 0.0});
    const double cost_tail = poisson_tail_bound(mean, i, q, env);
    if (mass_tail < kTailMass && cost_tail <= kRelativeCostTail * std::max(std::abs(sum), 1e-300)) break;
    if (mass_tail < kTailMass && cost_tail == 0.0) break;
  }
  return sum;
}

void require_finite_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be finite and > 0");
}

std::int64_t gcd64(std::int64_t a, std::int64_t b) { return std::gcd(a, b); }

// Smallest m <= kMaxDenominator with |r - n/m| <= tol*r.
std::optional<std::pair<std::int64_t, std::int64_t>> rationalize(double r) {
  for (std::int64_t m = 1; m <= kMaxDenominator; ++m) {
    const double n = std::round(r * static_cast<double>(m));
    if (std::abs(r - n / static_cast<double>(m)) <= kFeasibilityTolerance * r) {
      return std::make_pair(static_cast<std::int64_t>(n), m);
    }
  }
  return std::nullopt;
}

// Common quantum q with p_k = u_k q, or nullopt if the powers are incommensurable.
std::optional<std::pair<double, std::vector<std::int64_t>>> common_quantum(const std::vector<PowerClass>& dist) {
  double pmin = std::numeric_limits<double>::infinity();
  for (const auto& c : dist) pmin = std::min(pmin, c.power);
  std::int64_t lcm = 1;
  for (const auto& c : dist) {
    auto frac = rationalize(c.power / pmin);
    if (!frac) return std::nullopt;
    lcm = lcm / gcd64(lcm, frac->second) * frac->second;
    if (lcm > kMaxDenominator) return std::nullopt;
  }
  const double quantum = pmin / static_cast<double>(lcm);
  std::vector<std::int64_t> units;
  for (const auto& c : dist) {
    const auto u = std::llround(c.power / quantum);
    if (u < 1 || std::abs(c.power - static_cast<double>(u) * quantum) > kFeasibilityTolerance * c.power) {
      return std::nullopt;
    }
    units.push_back(u);
  }
  return std::make_pair(quantum, std::move(units));
}

// Poisson pmf truncated where the remaining mass drops below `tail`.
std::vector<double> truncated_poisson(double mean, double tail) {
  std::vector<double> pmf;
  for (std::uint64_t i = 0;; ++i) {
    const double q = std::exp(log_poisson(mean, i));
    pmf.push_back(q);
    if (static_cast<double>(i) >= mean && poisson_tail_bound(mean, i, q, {1.0, 0.0, 0.0}) < tail) break;
  }
  return pmf;
}

}  // namespace

void StochasticParams::validate() const {
  require_finite_positive(lambda, "lambda");
  require_finite_positive(service, "service rate");
  if (!(deadline_rate >= 0.0) || !std::isfinite(deadline_rate)) {
    throw InvalidArgument("deadline rate must be finite and >= 0");
  }
  if (power_dist.empty()) throw InvalidArgument("power distribution is empty");
  double total = 0.0;
  for (std::size_t k = 0; k < power_dist.size(); ++k) {
    require_finite_positive(power_dist[k].power, "power");
    require_finite_positive(power_dist[k].weight, "power weight");
    for (std::size_t j = 0; j < k; ++j) {
      if (power_dist[j].power == power_dist[k].power) throw InvalidArgument("power classes must be distinct");
    }
    total += power_dist[k].weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("power weights must sum to 1");
}

double StochasticParams::mean_power() const {
  double m = 0.0;
  for (const auto& c : power_dist) m += c.power * c.weight;
  return m;
}

bool StochasticParams::unit_power() const { return power_dist.size() == 1 && power_dist.front().power == 1.0; }

double mm_inf_pmf(const StochasticParams& params, std::uint64_t i) {
  params.validate();
  return std::exp(log_poisson(params.lambda / params.service, i));
}

StationaryDistribution poisson_distribution(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw InvalidArgument("Poisson mean must be finite and >= 0");
  StationaryDistribution out{{}, truncated_poisson(mean, kTailMass), 0.0};
  const auto n = out.probabilities.size() - 1;
  out.truncation_error = poisson_tail_bound(mean, n, out.probabilities.back(), {1.0, 0.0, 0.0});
  // lgamma loses ~1e-13 relative at large means, shared by every term; rescale it away.
  const double mass = std::accumulate(out.probabilities.begin(), out.probabilities.end(), 0.0);
  for (double& q : out.probabilities) q *= (1.0 - out.truncation_error) / mass;
  out.support.resize(out.probabilities.size());
  std::iota(out.support.begin(), out.support.end(), 0.0);
  return out;
}

double default_policy_cost(const StochasticParams& params, const CostFunction& cost) {
  params.validate();
  if (!params.unit_power()) {
    throw InvalidArgument("default_policy_cost assumes unit power; use compound_default_cost");
  }
  return poisson_expectation(params.lambda / params.service, cost.growth_envelope(),
                             [&](std::uint64_t i) { return cost(static_cast<double>(i)); });
}

CompoundCost compound_default_cost(const StochasticParams& params, const CostFunction& cost, std::uint64_t mc_seed,
                                   std::uint64_t mc_samples) {
  params.validate();
  const auto& dist = params.power_dist;
  const double offered = params.lambda / params.service;

  if (auto grid = common_quantum(dist)) {
    const auto& [quantum, units] = *grid;
    std::size_t span = 1;
    std::vector<std::vector<double>> parts;
    for (std::size_t k = 0; k < dist.size(); ++k) {
      parts.push_back(truncated_poisson(offered * dist[k].weight, kTailMass / static_cast<double>(dist.size())));
      span += (parts.back().size() - 1) * static_cast<std::size_t>(units[k]);
    }
    if (span <= kMaxQuantumGrid) {
      std::vector<double> pmf{1.0};
      for (std::size_t k = 0; k < dist.size(); ++k) {
        const auto stride = static_cast<std::size_t>(units[k]);
        std::vector<double> next(pmf.size() + (parts[k].size() - 1) * stride, 0.0);
        for (std::size_t i = 0; i < pmf.size(); ++i) {
          if (pmf[i] == 0.0) continue;
          for (std::size_t j = 0; j < parts[k].size(); ++j) next[i + j * stride] += pmf[i] * parts[k][j];
        }
        pmf = std::move(next);
      }
      double value = 0.0;
      for (std::size_t v = 0; v < pmf.size(); ++v) {
        if (pmf[v] != 0.0) value += pmf[v] * cost(static_cast<double>(v) * quantum);
      }
      return {value, 0.0, true, quantum};
    }
  }

  // Incommensurable powers: plain Monte Carlo over the independent class counts.
  CounterRng rng = CounterRng::stream(mc_seed, 0, 0xC0DE);
  std::vector<std::poisson_distribution<long long>> counts;
  for (const auto& c : dist) counts.emplace_back(offered * c.weight);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::uint64_t n = 1; n <= mc_samples; ++n) {
    double power = 0.0;
    for (std::size_t k = 0; k < dist.size(); ++k) power += dist[k].power * static_cast<double>(counts[k](rng));
    const double c = cost(power);
    const double delta = c - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (c - mean);
  }
  const double var = mc_samples > 1 ? m2 / static_cast<double>(mc_samples - 1) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(mc_samples)), false, 0.0};
}

double power_weighted_mixture_cost(const StochasticParams& params, const CostFunction& cost) {
  params.validate();
  const auto env = cost.growth_envelope();
  std::array<double, 3> mixed{0.0, 0.0, 0.0};
  for (const auto& c : params.power_dist) {
    mixed[0] += c.power * env[0];
    mixed[1] += c.power * env[1] * c.weight;
    mixed[2] += c.power * env[2] * c.weight * c.weight;
  }
  return poisson_expectation(params.lambda / params.service, mixed, [&](std::uint64_t i) {
    double v = 0.0;
    for (const auto& c : params.power_dist) v += c.power * cost(static_cast<double>(i) * c.weight);
    return v;
  });
}

double universal_lower_bound(const StochasticParams& params, const CostFunction& cost) {
  params.validate();
  return cost(params.offered_power());
}

namespace {

struct MmcLogWeights {
  std::vector<double> head;  // log pi_i for i = 0..c (normalized)
  double log_rho;
  double rho;
};

MmcLogWeights mmc_weights(double lambda, double service, std::uint64_t servers) {
  require_finite_positive(lambda, "lambda");
  require_finite_positive(service, "service rate");
  if (servers < 1) throw InvalidArgument("server count must be >= 1");
  const double offered = lambda / service;
  const double rho = offered / static_cast<double>(servers);
  if (!(rho < 1.0)) {
    throw UnstableQueue("M/M/c unstable: rho = " + std::to_string(rho) + " with c = " + std::to_string(servers));
  }
  MmcLogWeights w{std::vector<double>(servers + 1), std::log(rho), rho};
  for (std::uint64_t i = 0; i <= servers; ++i) {
    w.head[i] = static_cast<double>(i) * std::log(offered) - std::lgamma(static_cast<double>(i) + 1.0);
  }
  // Tail beyond c is geometric: sum_{i>c} w_c rho^{i-c} = w_c rho/(1-rho).
  const double log_tail = w.head.back() + std::log(rho) - std::log1p(-rho);
  double top = std::max(*std::max_element(w.head.begin(), w.head.end()), log_tail);
  double z = std::exp(log_tail - top);
  for (double lw : w.head) z += std::exp(lw - top);
  const double log_z = top + std::log(z);
  for (double& lw : w.head) lw -= log_z;
  return w;
}

}  // namespace

StationaryDistribution mmc_stationary(double lambda, double service, std::uint64_t servers) {
  const auto w = mmc_weights(lambda, service, servers);
  const double log_pc = w.head.back();
  // Exact remaining mass after index n.
  auto tail_after = [&](std::uint64_t n) {
    return std::exp(log_pc + static_cast<double>(n - servers + 1) * w.log_rho - std::log1p(-w.rho));
  };
  std::vector<double> probs;
  for (double lw : w.head) probs.push_back(std::exp(lw));
  // Suffix mass of the head plus geometric tail decides where to cut.
  std::vector<double> suffix(probs.size() + 1, 0.0);
  suffix[probs.size()] = tail_after(servers);
  for (std::size_t i = probs.size(); i-- > 0;) suffix[i] = suffix[i + 1] + probs[i];
  StationaryDistribution out;
  std::size_t cut = probs.size();
  for (std::size_t n = 0; n < probs.size(); ++n) {
    if (suffix[n + 1] < kTailMass) {
      cut = n + 1;
      break;
    }
  }
  if (cut < probs.size()) {
    probs.resize(cut);
    out.truncation_error = suffix[cut];
  } else {
    std::uint64_t n = servers;
    while (tail_after(n) >= kTailMass) {
      ++n;
      probs.push_back(std::exp(log_pc + static_cast<double>(n - servers) * w.log_rho));
    }
    out.truncation_error = tail_after(n);
  }
  out.probabilities = std::move(probs);
  out.support.resize(out.probabilities.size());
  std::iota(out.support.begin(), out.support.end(), 0.0);
  return out;
}

double erlang_c(double lambda, double service, std::uint64_t servers) {
  const auto w = mmc_weights(lambda, service, servers);
  return std::exp(w.head.back() - std::log1p(-w.rho));
}

double mmc_power_cost(double lambda, double service, std::uint64_t servers, const CostFunction& cost) {
  const auto w = mmc_weights(lambda, service, servers);
  double sum = 0.0;
  for (std::uint64_t i = 0; i < servers; ++i) sum += std::exp(w.head[i]) * cost(static_cast<double>(i));
  const double busy = std::exp(w.head.back() - std::log1p(-w.rho));
  return sum + busy * cost(static_cast<double>(servers));
}

std::vector<AsymptoticRow> cr_asymptotics(const StochasticParams& params, std::span<const double> epsilons,
                                          const CostFunction& cost) {
  params.validate();
  if (!params.unit_power()) throw InvalidArgument("threshold asymptotics assume unit power");
  const double offered = params.lambda / params.service;
  const double bound = universal_lower_bound(params, cost);
  std::vector<AsymptoticRow> rows;
  for (double eps : epsilons) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidArgument("epsilon must be finite and > 0");
    AsymptoticRow row{};
    row.epsilon = eps;
    row.threshold = offered + eps;
    row.servers = static_cast<std::uint64_t>(std::max(1.0, std::ceil(row.threshold)));
    row.rho = offered / static_cast<double>(row.servers);
    row.lower_bound = bound;
    row.stable = row.rho < 1.0;
    if (row.stable) {
      row.mmc_cost = mmc_power_cost(params.lambda, params.service, row.servers, cost);
      row.gap = row.mmc_cost - bound;
    } else {
      row.mmc_cost = std::numeric_limits<double>::quiet_NaN();
      row.gap = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gridsched::stochastic
