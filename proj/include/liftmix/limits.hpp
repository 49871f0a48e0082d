#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "liftmix/allocation.hpp"
#include "liftmix/model.hpp"
#include "liftmix/parallel.hpp"
#include "liftmix/predictive.hpp"
#include "liftmix/random.hpp"
#include "liftmix/samplers.hpp"
#include "liftmix/stats.hpp"
#include "liftmix/velocity.hpp"

namespace liftmix::limits {

/// Point of the probability simplex.
using SimplexPoint = std::vector<double>;

inline void validate_simplex(const SimplexPoint& x) {
  if (x.size() < 2) throw std::invalid_argument("simplex point needs at least 2 coordinates");
  double total = 0.0;
  for (double v : x) {
    if (!(v >= 0.0)) throw std::invalid_argument("simplex coordinates must be non-negative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("simplex coordinates must sum to 1");
}

inline double sum_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e;
  return s;
}

/// Integer counts n * x, rejecting points off the 1/n grid.
inline std::vector<std::size_t> grid_counts(std::size_t n, const SimplexPoint& x) {
  validate_simplex(x);
  std::vector<std::size_t> counts(x.size());
  std::size_t total = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double c = x[k] * static_cast<double>(n);
    const double r = std::round(c);
    if (std::abs(c - r) > 1e-9) throw std::invalid_argument("n * x must be integral");
    counts[k] = static_cast<std::size_t>(r);
    total += counts[k];
  }
  if (total != n) throw std::invalid_argument("n * x must sum to n");
  return counts;
}

struct StepMoments {
  /// E[X_{t+1,k} - x_k].
  std::vector<double> drift;
  /// E[(X_{t+1,k} - x_k)(X_{t+1,k'} - x_k')].
  Eigen::MatrixXd second;
};

/// One-step moments of the cluster frequencies under the prior-only Gibbs
/// kernel, by summing over the n * K outcomes (point i, new label k).
inline StepMoments mg_step_moments_exact(std::size_t n, const std::vector<double>& alpha,
                                         const std::vector<std::size_t>& counts) {
  const std::size_t K = alpha.size();
  if (counts.size() != K) throw std::invalid_argument("counts must have K entries");
  const double A = sum_of(alpha);
  const double dn = static_cast<double>(n);
  StepMoments out;
  out.drift.assign(K, 0.0);
  out.second = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
  // All points of cluster j share the same conditional, so outcomes are
  // grouped by (j, k) with weight n_j / n.
  for (std::size_t j = 0; j < K; ++j) {
    if (counts[j] == 0) continue;
    const double pick = static_cast<double>(counts[j]) / dn;
    for (std::size_t k = 0; k < K; ++k) {
      if (k == j) continue;
      const double p = pick * (alpha[k] + static_cast<double>(counts[k])) / (A + dn - 1.0);
      out.drift[k] += p / dn;
      out.drift[j] -= p / dn;
      const auto jj = static_cast<Eigen::Index>(j);
      const auto kk = static_cast<Eigen::Index>(k);
      const double w = p / (dn * dn);
      out.second(kk, kk) += w;
      out.second(jj, jj) += w;
      out.second(kk, jj) -= w;
      out.second(jj, kk) -= w;
    }
  }
  return out;
}

inline StepMoments mg_step_moments_exact(std::size_t n, const std::vector<double>& alpha, const SimplexPoint& x) {
  return mg_step_moments_exact(n, alpha, grid_counts(n, x));
}

/// (alpha_k - |alpha| x_k) / (n (|alpha| + n - 1)).
inline std::vector<double> mg_drift_closed_form(std::size_t n, const std::vector<double>& alpha,
                                                const SimplexPoint& x) {
  const double A = sum_of(alpha);
  const double dn = static_cast<double>(n);
  std::vector<double> d(alpha.size());
  for (std::size_t k = 0; k < alpha.size(); ++k) d[k] = (alpha[k] - A * x[k]) / (dn * (A + dn - 1.0));
  return d;
}

/// max{0, (alpha_minus - 1)/x_minus + (1 - alpha_plus)/x_plus}, where "minus"
/// is the cluster losing mass under the current direction.
inline double pdmp_rate_beta(double x_minus, double x_plus, double alpha_minus, double alpha_plus) {
  return std::max(0.0, (alpha_minus - 1.0) / x_minus + (1.0 - alpha_plus) / x_plus);
}

/// Same, with the direction read from the velocity table: flow(source, target) = +1.
inline double pdmp_rate_beta(const SimplexPoint& x, const VelocityState& v, const std::vector<double>& alpha,
                             std::size_t k, std::size_t kp) {
  const auto [src, tgt] = v.direction(std::min(k, kp), std::max(k, kp));
  return pdmp_rate_beta(x[src], x[tgt], alpha[src], alpha[tgt]);
}

/// Exact acceptance probability of moving one point from `source` to
/// `target` under the prior-only target at counts n * x.
inline double nr_acceptance_exact(std::size_t n, const std::vector<double>& alpha, const SimplexPoint& x,
                                  std::size_t source, std::size_t target) {
  const auto counts = grid_counts(n, x);
  if (counts[source] == 0) throw std::invalid_argument("source cluster is empty");
  const ModelSpec model = ModelSpec::prior_only(alpha);
  const Dataset data = Dataset::prior_only(n);
  std::vector<std::size_t> labels;
  labels.reserve(n);
  for (std::size_t k = 0; k < counts.size(); ++k) labels.insert(labels.end(), counts[k], k);
  const AllocationState state(model, data, std::move(labels));
  const std::size_t i = state.members(source)[0];
  return std::min(1.0, std::exp(log_accept_ratio(model, state, i, source, target)));
}

/// |n (1 - acc) - beta| at counts n * x for a move source -> target.
inline double nr_acceptance_expansion_check(std::size_t n, const std::vector<double>& alpha, const SimplexPoint& x,
                                            std::size_t source, std::size_t target) {
  const double acc = nr_acceptance_exact(n, alpha, x, source, target);
  const double beta = pdmp_rate_beta(x[source], x[target], alpha[source], alpha[target]);
  return std::abs(static_cast<double>(n) * (1.0 - acc) - beta);
}

struct WrightFisherOptions {
  double t_end = 1.0;
  double dt = 1e-4;
  /// Drop the diffusion term (deterministic drift only).
  bool zero_noise = false;
  /// Record every `record_every` steps; 0 records only the endpoints.
  std::size_t record_every = 0;
};

struct SimplexPath {
  std::vector<double> times;
  std::vector<SimplexPoint> points;
};

/// Euler-Maruyama for dX = (1/2)(alpha - |alpha| X) dt + B dW with
/// B B^T = diag(X) - X X^T, realised as
/// noise_k = sqrt(x_k) dW_k - x_k sum_j sqrt(x_j) dW_j.
/// Negative coordinates are clipped to 0 and the point renormalised after
/// every step.
template <class Gen>
SimplexPath simulate_wright_fisher(const std::vector<double>& alpha, SimplexPoint x, const WrightFisherOptions& opt,
                                   Gen& gen) {
  if (!(opt.dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(opt.t_end >= 0.0)) throw std::invalid_argument("t_end must be non-negative");
  if (alpha.size() != x.size()) throw std::invalid_argument("alpha and x0 must have the same length");
  validate_simplex(x);
  const std::size_t K = x.size();
  const double A = sum_of(alpha);
  const auto steps = static_cast<std::size_t>(std::ceil(opt.t_end / opt.dt - 1e-9));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> dw(K);
  std::vector<double> root(K);
  SimplexPath path;
  path.times.push_back(0.0);
  path.points.push_back(x);
  double t = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    const double h = std::min(opt.dt, opt.t_end - t);
    const double sh = std::sqrt(h);
    double common = 0.0;
    if (!opt.zero_noise) {
      for (std::size_t k = 0; k < K; ++k) {
        dw[k] = sh * normal(gen);
        root[k] = std::sqrt(x[k]);
        common += root[k] * dw[k];
      }
    }
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      double next = x[k] + 0.5 * (alpha[k] - A * x[k]) * h;
      if (!opt.zero_noise) next += root[k] * dw[k] - x[k] * common;
      x[k] = std::max(0.0, next);
      total += x[k];
    }
    for (double& v : x) v /= total;
    t += h;
    const bool last = s + 1 == steps;
    if (last || (opt.record_every > 0 && (s + 1) % opt.record_every == 0)) {
      path.times.push_back(t);
      path.points.push_back(x);
    }
  }
  return path;
}

/// State of the limiting piecewise deterministic process.
struct PdmpState {
  SimplexPoint x;
  VelocityState velocity;
  double M = 100.0;
  double t = 0.0;
  bool frozen = false;

  bool inside() const {
    for (double v : x) {
      if (v <= 1.0 / M) return false;
    }
    return true;
  }
};

/// Drift matrix A(v) with dx/dt = A(v) x:
/// Phi_k = (1/(K-1)) sum_{k' != k} V(k', k) (x_k + x_k').
inline Eigen::MatrixXd pdmp_drift_matrix(const VelocityState& v) {
  const std::size_t K = v.num_components();
  const auto n = static_cast<Eigen::Index>(K);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  const double scale = 1.0 / static_cast<double>(K - 1);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t kp = 0; kp < K; ++kp) {
      if (kp == k) continue;
      const double f = scale * static_cast<double>(v.flow(kp, k));
      A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) += f;
      A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(kp)) += f;
    }
  }
  return A;
}

inline std::vector<double> pdmp_drift(const SimplexPoint& x, const VelocityState& v) {
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::VectorXd d = pdmp_drift_matrix(v) * xv;
  return {d.data(), d.data() + d.size()};
}

/// Flip rate of each unordered pair (lexicographic pair order):
/// (x_k + x_k') / (K - 1) * [beta at the current direction + 2 xi].
inline std::vector<double> pdmp_pair_rates(const SimplexPoint& x, const VelocityState& v,
                                           const std::vector<double>& alpha, double xi) {
  const std::size_t K = x.size();
  std::vector<double> rates(num_pairs(K));
  for (std::size_t k = 0; k + 1 < K; ++k) {
    for (std::size_t kp = k + 1; kp < K; ++kp) {
      rates[pair_index(K, k, kp)] =
          (x[k] + x[kp]) / static_cast<double>(K - 1) * (pdmp_rate_beta(x, v, alpha, k, kp) + 2.0 * xi);
    }
  }
  return rates;
}

/// Upper bound on the total event rate inside E_M:
/// 2 max_k |alpha_k - 1| M + 2 xi.
inline double pdmp_rate_bound(const std::vector<double>& alpha, double xi, double M) {
  double a = 0.0;
  for (double v : alpha) a = std::max(a, std::abs(v - 1.0));
  return 2.0 * a * M + 2.0 * xi;
}

struct PdmpOptions {
  double t_end = 1.0;
  /// Grid on which the flow is advanced and the exit from E_M detected.
  double grid = 1e-4;
  /// Record the state every `record_dt` time units; 0 records endpoints only.
  double record_dt = 0.0;
};

struct PdmpPath {
  std::vector<PdmpState> states;
  std::size_t events = 0;
  std::size_t proposals = 0;
};

namespace detail {

inline Eigen::VectorXd as_vector(const SimplexPoint& x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

inline bool vector_inside(const Eigen::VectorXd& x, double M) {
  return (x.array() > 1.0 / M).all();
}

// Advance the linear flow from `x` over `span` time units; stops at the first
// exit from E_M (located by bisection on the grid interval) and reports it.
inline bool flow_until_exit(const Eigen::MatrixXd& A, const Eigen::MatrixXd& step, double grid, double M,
                            Eigen::VectorXd& x, double span, double& elapsed) {
  elapsed = 0.0;
  while (elapsed < span) {
    const double h = std::min(grid, span - elapsed);
    const Eigen::VectorXd next = h == grid ? Eigen::VectorXd(step * x) : Eigen::VectorXd((A * h).exp() * x);
    if (vector_inside(next, M)) {
      x = next;
      elapsed += h;
      continue;
    }
    double lo = 0.0;
    double hi = h;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (vector_inside(Eigen::VectorXd((A * mid).exp() * x), M)) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    x = (A * hi).exp() * x;
    elapsed += hi;
    return true;
  }
  return false;
}

}  // namespace detail

/// Simulates the limiting process: linear flow between events, events by
/// thinning against pdmp_rate_bound, pair selection proportional to the pair
/// rates, and absorption on leaving E_M = {x_k > 1/M for all k}.
template <class Gen>
PdmpPath simulate_pdmp(const std::vector<double>& alpha, double xi, PdmpState z0, const PdmpOptions& opt,
                       Gen& gen) {
  validate_simplex(z0.x);
  if (alpha.size() != z0.x.size() || z0.velocity.num_components() != z0.x.size()) {
    throw std::invalid_argument("alpha, x0 and velocity must agree on K");
  }
  if (!z0.inside()) throw std::invalid_argument("x0 must lie in E_M");
  if (!(opt.grid > 0.0) || !(opt.t_end >= 0.0) || xi < 0.0) throw std::invalid_argument("invalid PDMP options");
  const double bound = pdmp_rate_bound(alpha, xi, z0.M);
  PdmpPath path;
  PdmpState z = std::move(z0);
  z.frozen = false;
  path.states.push_back(z);

  Eigen::VectorXd x = detail::as_vector(z.x);
  Eigen::MatrixXd A = pdmp_drift_matrix(z.velocity);
  Eigen::MatrixXd step = (A * opt.grid).exp();
  double next_record = opt.record_dt > 0.0 ? opt.record_dt : std::numeric_limits<double>::infinity();
  std::exponential_distribution<double> clock(bound > 0.0 ? bound : 1.0);
  double next_event = bound > 0.0 ? z.t + clock(gen) : std::numeric_limits<double>::infinity();

  auto sync = [&] { z.x.assign(x.data(), x.data() + x.size()); };

  while (z.t < opt.t_end) {
    const double target = std::min({opt.t_end, next_event, next_record});
    double elapsed = 0.0;
    const bool exited = detail::flow_until_exit(A, step, opt.grid, z.M, x, target - z.t, elapsed);
    z.t += elapsed;
    if (exited) {
      z.frozen = true;
      sync();
      // Absorbed: constant from here on.
      while (next_record <= opt.t_end) {
        PdmpState rec = z;
        rec.t = next_record;
        path.states.push_back(rec);
        next_record += opt.record_dt;
      }
      z.t = opt.t_end;
      path.states.push_back(z);
      return path;
    }
    z.t = target;
    sync();
    if (target == next_event && target < opt.t_end) {
      ++path.proposals;
      const auto rates = pdmp_pair_rates(z.x, z.velocity, alpha, xi);
      const double total = sum_of(rates);
      if (total > bound * (1.0 + 1e-12)) throw std::logic_error("PDMP rate exceeds its thinning bound");
      if (uniform01(gen) * bound < total) {
        double u = uniform01(gen) * total;
        std::size_t p = 0;
        while (p + 1 < rates.size() && u >= rates[p]) {
          u -= rates[p];
          ++p;
        }
        const auto [k, kp] = pair_from_index(z.x.size(), p);
        z.velocity.flip(k, kp);
        ++path.events;
        A = pdmp_drift_matrix(z.velocity);
        step = (A * opt.grid).exp();
      }
      next_event = z.t + clock(gen);
    }
    if (target == next_record && target < opt.t_end) {
      path.states.push_back(z);
      next_record += opt.record_dt;
    }
  }
  path.states.push_back(z);
  return path;
}

enum class RescaledKernel { MG, NR };

inline std::string_view to_string(RescaledKernel k) { return k == RescaledKernel::MG ? "mg" : "nr"; }

struct RescaledComparison {
  RescaledKernel kernel = RescaledKernel::MG;
  std::vector<double> alpha{1.0, 1.0};
  /// Initial frequencies; n * x0 must be integral for every n compared.
  SimplexPoint x0{0.5, 0.5};
  double t = 1.0;
  double xi = 0.5;
  double M = 100.0;
  std::size_t replicates = 2000;
  /// Draws from the limiting process per reference sample.
  std::size_t limit_draws = 20000;
  double dt = 1e-4;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
};

struct RescaledRow {
  std::size_t n = 0;
  double distance = 0.0;
};

struct RescaledTable {
  std::vector<RescaledRow> rows;
  /// W1 between the reference limit sample and an independent limit sample
  /// with as many draws as the chain sample.
  double noise_floor = 0.0;
};

/// First-coordinate endpoint of the rescaled chain after ceil(n^2 t / 2) Gibbs
/// steps (MG) or ceil(n t) lifted steps with the E_M freeze (NR), started at
/// counts n * x0 with uniform velocities.
template <class Gen>
double rescaled_chain_endpoint(const RescaledComparison& cfg, std::size_t n, Gen& gen) {
  const ModelSpec model = ModelSpec::prior_only(cfg.alpha);
  const Dataset data = Dataset::prior_only(n);
  const auto counts = grid_counts(n, cfg.x0);
  std::vector<std::size_t> labels;
  for (std::size_t k = 0; k < counts.size(); ++k) labels.insert(labels.end(), counts[k], k);
  AllocationState state(model, data, std::move(labels));
  const double dn = static_cast<double>(n);
  if (cfg.kernel == RescaledKernel::MG) {
    const auto steps = static_cast<std::uint64_t>(std::ceil(0.5 * dn * dn * cfg.t - 1e-9));
    for (std::uint64_t s = 0; s < steps; ++s) step_mg(state, model, gen);
  } else {
    VelocityState velocity = VelocityState::uniform(model.num_components(), gen);
    const auto steps = static_cast<std::uint64_t>(std::ceil(dn * cfg.t - 1e-9));
    const auto threshold = dn / cfg.M;
    auto inside = [&] {
      for (std::size_t k = 0; k < state.num_components(); ++k) {
        if (static_cast<double>(state.count(k)) <= threshold) return false;
      }
      return true;
    };
    for (std::uint64_t s = 0; s < steps && inside(); ++s) step_nr(state, velocity, model, cfg.xi, gen);
  }
  return static_cast<double>(state.count(0)) / dn;
}

/// First-coordinate endpoint at time t of the matching limit: Wright-Fisher
/// for MG, the frozen PDMP for NR.
template <class Gen>
double limit_endpoint(const RescaledComparison& cfg, Gen& gen) {
  if (cfg.kernel == RescaledKernel::MG) {
    WrightFisherOptions opt;
    opt.t_end = cfg.t;
    opt.dt = cfg.dt;
    return simulate_wright_fisher(cfg.alpha, cfg.x0, opt, gen).points.back()[0];
  }
  PdmpState z;
  z.x = cfg.x0;
  z.M = cfg.M;
  z.velocity = VelocityState::uniform(cfg.x0.size(), gen);
  PdmpOptions opt;
  opt.t_end = cfg.t;
  opt.grid = cfg.dt;
  return simulate_pdmp(cfg.alpha, cfg.xi, std::move(z), opt, gen).states.back().x[0];
}

/// W1 distance between the rescaled chain and its limit for each n, plus the
/// self-distance of the limit across two independent seeds.
inline RescaledTable rescaled_chain_vs_limit(const RescaledComparison& cfg, const std::vector<std::size_t>& ns) {
  auto limit_sample = [&](std::uint64_t stream, std::size_t draws) {
    std::vector<double> out(draws);
    parallel_for(draws, cfg.threads, [&](std::size_t r) {
      Rng gen(stream_seed(stream_seed(cfg.seed, stream), r));
      out[r] = limit_endpoint(cfg, gen);
    });
    return out;
  };
  const auto reference = limit_sample(1, cfg.limit_draws);
  const auto second = limit_sample(2, cfg.replicates);
  RescaledTable table;
  table.noise_floor = w1_distance(reference, second);
  for (std::size_t idx = 0; idx < ns.size(); ++idx) {
    const std::size_t n = ns[idx];
    std::vector<double> chain(cfg.replicates);
    parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
      Rng gen(stream_seed(stream_seed(cfg.seed, 100 + n), r));
      chain[r] = rescaled_chain_endpoint(cfg, n, gen);
    });
    table.rows.push_back({n, w1_distance(chain, reference)});
  }
  return table;
}

}  // namespace liftmix::limits
