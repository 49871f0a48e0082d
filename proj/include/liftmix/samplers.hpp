#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "liftmix/allocation.hpp"
#include "liftmix/model.hpp"
#include "liftmix/predictive.hpp"
#include "liftmix/random.hpp"
#include "liftmix/velocity.hpp"

namespace liftmix {

/// Conditional-density evaluations charged to one pair-based move.
inline constexpr std::uint32_t kPairMoveCost = 2;

enum class MoveKind {
  MgUpdate,          ///< Gibbs update of one allocation.
  PairAccept,        ///< Proposed single-point move accepted.
  PairReject,        ///< Reversible kernel: proposal rejected, state kept.
  PairRejectFlip,    ///< Lifted kernel: proposal rejected, velocity flipped.
  EmptySource,       ///< Reversible kernel: source cluster empty, no-op.
  EmptyClusterFlip,  ///< Lifted kernel: source cluster empty, velocity flipped.
  CdAllocation,      ///< Conditional sampler: allocation given (w, theta).
  CdParams,          ///< Conditional sampler: (w, theta) given allocations.
};

inline std::string_view to_string(MoveKind kind) {
  switch (kind) {
    case MoveKind::MgUpdate: return "mg-update";
    case MoveKind::PairAccept: return "pair-accept";
    case MoveKind::PairReject: return "pair-reject";
    case MoveKind::PairRejectFlip: return "pair-reject-flip";
    case MoveKind::EmptySource: return "empty-source";
    case MoveKind::EmptyClusterFlip: return "empty-cluster-flip";
    case MoveKind::CdAllocation: return "cd-allocation";
    case MoveKind::CdParams: return "cd-params";
  }
  return "unknown";
}

struct StepOutcome {
  MoveKind kind = MoveKind::MgUpdate;
  std::optional<std::size_t> point;
  std::optional<std::pair<std::size_t, std::size_t>> pair;
  /// Conditional-distribution evaluations spent by this step.
  std::uint64_t cost = 0;
  /// Refresh flips (probability xi/n each) applied during the step.
  std::uint32_t refresh_flips = 0;
  /// Lifted sub-steps taken; >1 only for the geometric-run kernel.
  std::uint64_t substeps = 1;
};

/// Mixture weights and atoms for the conditional sampler.
struct ConditionalParams {
  std::vector<double> weights;
  /// K rows of atom coordinates (dim entries each; one for PoissonGamma).
  std::vector<double> atoms;

  void validate(std::size_t K) const {
    if (weights.size() != K) throw std::invalid_argument("weights must have K entries");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("weights must be non-negative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("weights must sum to 1");
  }
};

namespace detail {

// Scratch buffer for per-step log weights. Chains are confined to one thread.
inline std::span<double> weight_scratch(std::size_t K) {
  thread_local std::vector<double> buffer;
  if (buffer.size() < K) buffer.resize(K);
  return {buffer.data(), K};
}

template <class Gen>
bool metropolis_accept(double log_ratio, Gen& gen) {
  if (log_ratio >= 0.0) return true;
  return std::log(uniform01_open_left(gen)) < log_ratio;
}

}  // namespace detail

/// Draw (k, kp), k < kp, with probability (n_k + n_kp) / ((K - 1) n): the
/// first label proportional to cluster size (the label of a uniform point),
/// the second uniform among the remaining K - 1.
template <class Gen>
std::pair<std::size_t, std::size_t> sample_pair(const AllocationState& state, Gen& gen) {
  const std::size_t K = state.num_components();
  const std::size_t k1 = state.label(uniform_index(gen, state.size()));
  std::size_t k2 = uniform_index(gen, K - 1);
  if (k2 >= k1) ++k2;
  return k1 < k2 ? std::pair{k1, k2} : std::pair{k2, k1};
}

/// Random-scan marginal Gibbs update.
template <class Gen>
StepOutcome step_mg(AllocationState& state, const ModelSpec& model, Gen& gen) {
  const std::size_t K = state.num_components();
  const std::size_t i = uniform_index(gen, state.size());
  auto weights = detail::weight_scratch(K);
  log_cond_weights(model, state, i, weights);
  const std::size_t k = sample_log_categorical(std::span<const double>(weights), gen);
  state.move_point(i, k);
  StepOutcome out;
  out.kind = MoveKind::MgUpdate;
  out.point = i;
  out.cost = K;
  return out;
}

/// Reversible pair kernel: pair from sample_pair, fair-coin direction, uniform
/// member of the source proposed to the target, Metropolis acceptance.
template <class Gen>
StepOutcome step_r(AllocationState& state, const ModelSpec& model, Gen& gen) {
  const auto [k, kp] = sample_pair(state, gen);
  const bool forward = bernoulli(gen, 0.5);
  const std::size_t source = forward ? k : kp;
  const std::size_t target = forward ? kp : k;
  StepOutcome out;
  out.pair = std::pair{k, kp};
  out.cost = kPairMoveCost;
  if (state.count(source) == 0) {
    out.kind = MoveKind::EmptySource;
    return out;
  }
  const auto members = state.members(source);
  const std::size_t i = members[uniform_index(gen, members.size())];
  out.point = i;
  if (detail::metropolis_accept(log_accept_ratio(model, state, i, source, target), gen)) {
    state.move_point(i, target);
    out.kind = MoveKind::PairAccept;
  } else {
    out.kind = MoveKind::PairReject;
  }
  return out;
}

/// Lifted kernel on the fixed pair (k, kp): refresh flip with probability
/// xi/n, move from the source given by v_{k,kp}, flip on an empty source or a
/// rejection, refresh flip again with probability xi/n.
template <class Gen>
StepOutcome step_lifted_pair(AllocationState& state, VelocityState& velocity, const ModelSpec& model,
                             std::size_t k, std::size_t kp, double xi, Gen& gen) {
  assert(k < kp);
  const double refresh = xi / static_cast<double>(state.size());
  StepOutcome out;
  out.pair = std::pair{k, kp};
  out.cost = kPairMoveCost;

  if (bernoulli(gen, refresh)) {
    velocity.flip(k, kp);
    ++out.refresh_flips;
  }
  const auto [source, target] = velocity.direction(k, kp);
  if (state.count(source) == 0) {
    velocity.flip(k, kp);
    out.kind = MoveKind::EmptyClusterFlip;
  } else {
    const auto members = state.members(source);
    const std::size_t i = members[uniform_index(gen, members.size())];
    out.point = i;
    if (detail::metropolis_accept(log_accept_ratio(model, state, i, source, target), gen)) {
      state.move_point(i, target);
      out.kind = MoveKind::PairAccept;
    } else {
      velocity.flip(k, kp);
      out.kind = MoveKind::PairRejectFlip;
    }
  }
  if (bernoulli(gen, refresh)) {
    velocity.flip(k, kp);
    ++out.refresh_flips;
  }
  return out;
}

/// Non-reversible kernel: pair from sample_pair, then one lifted step.
template <class Gen>
StepOutcome step_nr(AllocationState& state, VelocityState& velocity, const ModelSpec& model, double xi, Gen& gen) {
  const auto [k, kp] = sample_pair(state, gen);
  return step_lifted_pair(state, velocity, model, k, kp, xi, gen);
}

/// Number of lifted steps for one geometric run on a pair holding m points:
/// Geometric(s / m) on {1, 2, ...}, and 1 when the pair is empty.
template <class Gen>
std::uint64_t sample_run_length(std::size_t m, double s, Gen& gen) {
  if (m == 0) return 1;
  return sample_geometric(gen, s / static_cast<double>(m));
}

/// Geometric-run variant: pair uniform over all K(K-1)/2 pairs, then a
/// Geometric(s / (n_k + n_kp)) number of lifted steps on that pair.
template <class Gen>
StepOutcome step_qnr(AllocationState& state, VelocityState& velocity, const ModelSpec& model, double s, double xi,
                     Gen& gen) {
  assert(s > 0.0 && s <= 1.0);
  const std::size_t K = state.num_components();
  const auto [k, kp] = pair_from_index(K, uniform_index(gen, num_pairs(K)));
  const std::uint64_t t = sample_run_length(state.count(k) + state.count(kp), s, gen);
  StepOutcome out;
  for (std::uint64_t step = 0; step < t; ++step) {
    const StepOutcome sub = step_lifted_pair(state, velocity, model, k, kp, xi, gen);
    assert(sub.cost == kPairMoveCost);
    out.kind = sub.kind;
    out.point = sub.point;
    out.refresh_flips += sub.refresh_flips;
  }
  out.pair = std::pair{k, kp};
  out.cost = kPairMoveCost * t;
  out.substeps = t;
  return out;
}

/// Runs the geometric-run kernel one lifted sub-step at a time, so a budget of
/// lifted steps can be split across sweeps. Each call to advance() is one
/// lifted step; a new pair and run length are drawn when the current run ends.
class QnrScheduler {
 public:
  template <class Gen>
  StepOutcome advance(AllocationState& state, VelocityState& velocity, const ModelSpec& model, double s, double xi,
                      Gen& gen) {
    if (remaining_ == 0) {
      const std::size_t K = state.num_components();
      pair_ = pair_from_index(K, uniform_index(gen, num_pairs(K)));
      remaining_ = sample_run_length(state.count(pair_.first) + state.count(pair_.second), s, gen);
    }
    --remaining_;
    return step_lifted_pair(state, velocity, model, pair_.first, pair_.second, xi, gen);
  }

  std::uint64_t remaining() const { return remaining_; }

 private:
  std::pair<std::size_t, std::size_t> pair_{0, 1};
  std::uint64_t remaining_ = 0;
};

/// log f_theta(y) for the atom in row k of `atoms`.
inline double log_likelihood(const ModelSpec& model, std::span<const double> atoms, std::size_t k,
                             std::span<const double> y) {
  switch (model.kind) {
    case ModelKind::PriorOnly:
      return 0.0;
    case ModelKind::GaussianIso: {
      const std::size_t dim = model.dim;
      double sq = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double r = y[d] - atoms[k * dim + d];
        sq += r * r;
      }
      return -0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi * model.sigma2) -
             0.5 * sq / model.sigma2;
    }
    case ModelKind::PoissonGamma: {
      const double theta = atoms[k];
      return y[0] * std::log(theta) - theta - std::lgamma(y[0] + 1.0);
    }
  }
  return 0.0;
}

/// Draw (w, theta) from their full conditional given the allocations:
/// w ~ Dir(alpha + counts); theta_k from the conjugate posterior of cluster k.
template <class Gen>
void resample_params(ConditionalParams& params, const AllocationState& state, const ModelSpec& model, Gen& gen) {
  const std::size_t K = state.num_components();
  std::vector<double> post_alpha(K);
  for (std::size_t k = 0; k < K; ++k) post_alpha[k] = model.alpha[k] + static_cast<double>(state.count(k));
  params.weights = sample_dirichlet(std::span<const double>(post_alpha), gen);

  switch (model.kind) {
    case ModelKind::PriorOnly:
      params.atoms.clear();
      break;
    case ModelKind::GaussianIso: {
      const std::size_t dim = model.dim;
      params.atoms.resize(K * dim);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (std::size_t k = 0; k < K; ++k) {
        const auto& stats = state.stats(k);
        const double precision = 1.0 / model.sigma02 + static_cast<double>(stats.count) / model.sigma2;
        const double sd = std::sqrt(1.0 / precision);
        for (std::size_t d = 0; d < dim; ++d) {
          const double mean = (model.theta0[d] / model.sigma02 + stats.sum[d] / model.sigma2) / precision;
          params.atoms[k * dim + d] = mean + sd * normal(gen);
        }
      }
      break;
    }
    case ModelKind::PoissonGamma: {
      params.atoms.resize(K);
      for (std::size_t k = 0; k < K; ++k) {
        const auto& stats = state.stats(k);
        const double shape = model.beta1 + static_cast<double>(stats.count_sum);
        const double rate = model.beta2 + static_cast<double>(stats.count);
        params.atoms[k] = std::exp(sample_log_gamma(gen, shape)) / rate;
      }
      break;
    }
  }
}

/// Random-scan conditional sampler: index uniform on {0, ..., n}; index < n
/// resamples that allocation from w_k f_{theta_k}(Y_i), index n resamples
/// (w, theta).
template <class Gen>
StepOutcome step_cd(AllocationState& state, ConditionalParams& params, const ModelSpec& model, Gen& gen) {
  const std::size_t n = state.size();
  const std::size_t K = state.num_components();
  const std::size_t i = uniform_index(gen, n + 1);
  StepOutcome out;
  if (i < n) {
    auto weights = detail::weight_scratch(K);
    const auto y = model.kind == ModelKind::PriorOnly ? std::span<const double>{} : state.data().row(i);
    for (std::size_t k = 0; k < K; ++k) {
      weights[k] = std::log(params.weights[k]) + log_likelihood(model, params.atoms, k, y);
    }
    state.move_point(i, sample_log_categorical(std::span<const double>(weights), gen));
    out.kind = MoveKind::CdAllocation;
    out.point = i;
    out.cost = K;
  } else {
    resample_params(params, state, model, gen);
    out.kind = MoveKind::CdParams;
    out.cost = 0;
  }
  return out;
}

enum class InitMode { UniformRandom, AllInOne, Given };

inline InitMode parse_init_mode(std::string_view name) {
  if (name == "uniform" || name == "uniform-random" || name == "random") return InitMode::UniformRandom;
  if (name == "all-in-one" || name == "all_in_one" || name == "one") return InitMode::AllInOne;
  if (name == "given") return InitMode::Given;
  throw std::invalid_argument("unknown init mode '" + std::string(name) + "'");
}

inline std::string_view to_string(InitMode mode) {
  switch (mode) {
    case InitMode::UniformRandom: return "uniform";
    case InitMode::AllInOne: return "all-in-one";
    case InitMode::Given: return "given";
  }
  return "unknown";
}

struct ChainState {
  AllocationState allocation;
  VelocityState velocity;
};

/// Initial allocations per `mode` (given labels are 0-based) and velocity
/// entries iid uniform on {-1, +1}.
template <class Gen>
ChainState init_state(InitMode mode, const ModelSpec& model, const Dataset& data, Gen& gen,
                      std::span<const std::size_t> given = {}) {
  const std::size_t n = data.size();
  const std::size_t K = model.num_components();
  std::vector<std::size_t> labels(n, 0);
  switch (mode) {
    case InitMode::UniformRandom:
      for (auto& l : labels) l = uniform_index(gen, K);
      break;
    case InitMode::AllInOne:
      break;
    case InitMode::Given:
      if (given.size() != n) throw std::invalid_argument("given allocation must have length n");
      labels.assign(given.begin(), given.end());
      break;
  }
  AllocationState allocation(model, data, std::move(labels));
  return {std::move(allocation), VelocityState::uniform(K, gen)};
}

}  // namespace liftmix
