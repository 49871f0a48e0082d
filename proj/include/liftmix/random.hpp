#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace liftmix {

/// Engine used by every chain. mt19937_64 is fully specified by the standard,
/// so integer streams are identical across platforms; continuous draws go
/// through <random> distributions and are reproducible per build.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for stream `index` derived from a master seed:
/// splitmix64(master ^ splitmix64(index + 1)).
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

/// Uniform on [0, 1) with 53 random bits.
template <class Gen>
double uniform01(Gen& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Uniform on (0, 1].
template <class Gen>
double uniform01_open_left(Gen& gen) {
  return 1.0 - uniform01(gen);
}

template <class Gen>
std::size_t uniform_index(Gen& gen, std::size_t n) {
  assert(n > 0);
  const auto idx = static_cast<std::size_t>(uniform01(gen) * static_cast<double>(n));
  return std::min(idx, n - 1);
}

template <class Gen>
bool bernoulli(Gen& gen, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform01(gen) < p;
}

/// Geometric on {1, 2, ...} with success probability q, by inversion
/// ceil(log U / log(1 - q)).
template <class Gen>
std::uint64_t sample_geometric(Gen& gen, double q) {
  if (q >= 1.0) return 1;
  assert(q > 0.0);
  const double u = uniform01_open_left(gen);
  const double t = std::ceil(std::log(u) / std::log1p(-q));
  if (!(t >= 1.0)) return 1;
  if (t > 1e18) return static_cast<std::uint64_t>(1e18);
  return static_cast<std::uint64_t>(t);
}

/// Index drawn from unnormalized log weights. Max-subtraction before
/// exponentiation; inverse CDF scanned left to right.
template <class Gen>
std::size_t sample_log_categorical(std::span<const double> log_weights, Gen& gen) {
  assert(!log_weights.empty());
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  double total = 0.0;
  for (double lw : log_weights) total += std::exp(lw - top);
  double target = uniform01(gen) * total;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    target -= std::exp(log_weights[k] - top);
    if (target < 0.0) return k;
  }
  // Rounding can leave a tiny positive remainder; fall back to the last
  // index with non-zero mass.
  for (std::size_t k = log_weights.size(); k-- > 0;) {
    if (log_weights[k] > -std::numeric_limits<double>::infinity()) return k;
  }
  return log_weights.size() - 1;
}

/// log of a Gamma(shape, 1) variate. Uses the Gamma(shape + 1) * U^(1/shape)
/// boost for small shapes so that very small draws do not underflow.
template <class Gen>
double sample_log_gamma(Gen& gen, double shape) {
  assert(shape > 0.0);
  if (shape >= 1.0) {
    std::gamma_distribution<double> dist(shape, 1.0);
    return std::log(dist(gen));
  }
  std::gamma_distribution<double> dist(shape + 1.0, 1.0);
  return std::log(dist(gen)) + std::log(uniform01_open_left(gen)) / shape;
}

/// Dirichlet draw computed from log-gamma variates and normalized in log space.
template <class Gen>
std::vector<double> sample_dirichlet(std::span<const double> alpha, Gen& gen) {
  std::vector<double> logs(alpha.size());
  for (std::size_t k = 0; k < alpha.size(); ++k) logs[k] = sample_log_gamma(gen, alpha[k]);
  const double top = *std::max_element(logs.begin(), logs.end());
  double total = 0.0;
  for (double& l : logs) {
    l = std::exp(l - top);
    total += l;
  }
  for (double& l : logs) l /= total;
  return logs;
}

template <class Gen>
std::vector<std::size_t> sample_multinomial(std::size_t n, std::span<const double> probs, Gen& gen) {
  std::vector<std::size_t> counts(probs.size(), 0);
  std::size_t remaining = n;
  double mass_left = 1.0;
  for (std::size_t k = 0; k + 1 < probs.size() && remaining > 0; ++k) {
    const double p = mass_left > 0.0 ? std::clamp(probs[k] / mass_left, 0.0, 1.0) : 0.0;
    std::binomial_distribution<std::size_t> dist(remaining, p);
    counts[k] = dist(gen);
    remaining -= counts[k];
    mass_left -= probs[k];
  }
  counts.back() += remaining;
  return counts;
}

}  // namespace liftmix
