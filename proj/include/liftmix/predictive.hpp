#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "liftmix/allocation.hpp"
#include "liftmix/model.hpp"

namespace liftmix {

namespace detail {

// Predictive log density of y for a cluster with the given statistics, with y
// optionally subtracted from those statistics first.
inline double log_predictive_impl(const ModelSpec& model, const ClusterStats& stats, std::span<const double> y,
                                  bool exclude_y) {
  switch (model.kind) {
    case ModelKind::PriorOnly:
      return 0.0;
    case ModelKind::GaussianIso: {
      const double n_eff = static_cast<double>(stats.count) - (exclude_y ? 1.0 : 0.0);
      const double post_var = 1.0 / (1.0 / model.sigma02 + n_eff / model.sigma2);
      const double pred_var = model.sigma2 + post_var;
      double sq = 0.0;
      for (std::size_t d = 0; d < y.size(); ++d) {
        const double s = stats.sum[d] - (exclude_y ? y[d] : 0.0);
        const double mean = post_var * (model.theta0[d] / model.sigma02 + s / model.sigma2);
        const double r = y[d] - mean;
        sq += r * r;
      }
      const double p = static_cast<double>(y.size());
      return -0.5 * p * std::log(2.0 * std::numbers::pi * pred_var) - 0.5 * sq / pred_var;
    }
    case ModelKind::PoissonGamma: {
      const double yv = y[0];
      const double n_eff = static_cast<double>(stats.count) - (exclude_y ? 1.0 : 0.0);
      const double t_eff = static_cast<double>(stats.count_sum) - (exclude_y ? yv : 0.0);
      const double a = model.beta1 + t_eff;
      const double b = model.beta2 + n_eff;
      return std::lgamma(a + yv) - std::lgamma(a) - std::lgamma(yv + 1.0) + a * std::log(b) -
             (a + yv) * std::log(b + 1.0);
    }
  }
  return 0.0;
}

}  // namespace detail

/// log p(y | cluster statistics). `stats` must not contain y.
///
/// GaussianIso: N(y | mu, s2 I) with s2 = sigma2 + (1/sigma02 + n_k/sigma2)^-1
/// and mu = (1/sigma02 + n_k/sigma2)^-1 (theta0/sigma02 + S_k/sigma2).
/// PoissonGamma: negative-binomial form with (beta1 + T_k, beta2 + n_k).
/// PriorOnly: 0.
inline double log_predictive(const ModelSpec& model, const ClusterStats& stats, std::span<const double> y) {
  return detail::log_predictive_impl(model, stats, y, false);
}

/// log pi(c_i = k | c_{-i}) up to a constant shared across k, written to `out`
/// (length K). The state is not modified.
inline void log_cond_weights(const ModelSpec& model, const AllocationState& state, std::size_t i,
                             std::span<double> out) {
  const std::size_t K = state.num_components();
  assert(out.size() == K);
  const std::size_t own = state.label(i);
  const auto y = state.data().row(i);
  for (std::size_t k = 0; k < K; ++k) {
    const bool is_own = k == own;
    const double count_minus_i = static_cast<double>(state.count(k)) - (is_own ? 1.0 : 0.0);
    out[k] = std::log(model.alpha[k] + count_minus_i) +
             detail::log_predictive_impl(model, state.stats(k), y, is_own);
  }
}

inline std::vector<double> log_cond_weights(const ModelSpec& model, const AllocationState& state, std::size_t i) {
  std::vector<double> out(state.num_components());
  log_cond_weights(model, state, i, out);
  return out;
}

/// log r(c, i, k_minus, k_plus) for moving point i from k_minus to k_plus:
///   log(n_{k-} / (n_{k+} + 1)) + log pi(c_i = k+ | c_{-i}) - log pi(c_i = k- | c_{-i}).
/// The count factors are grouped as (n_{k-} / (alpha_{k-} + n_{k-} - 1)) and
/// ((alpha_{k+} + n_{k+}) / (n_{k+} + 1)) so that alpha = 1 gives exactly 0 in
/// the prior-only case.
inline double log_accept_ratio(const ModelSpec& model, const AllocationState& state, std::size_t i,
                               std::size_t k_minus, std::size_t k_plus) {
  assert(state.label(i) == k_minus);
  assert(k_minus != k_plus);
  const double n_minus = static_cast<double>(state.count(k_minus));
  const double n_plus = static_cast<double>(state.count(k_plus));
  assert(n_minus >= 1.0);
  const double count_terms = (std::log(n_minus) - std::log(model.alpha[k_minus] + n_minus - 1.0)) +
                             (std::log(model.alpha[k_plus] + n_plus) - std::log(n_plus + 1.0));
  if (model.kind == ModelKind::PriorOnly) return count_terms;
  const auto y = state.data().row(i);
  const double lp_plus = detail::log_predictive_impl(model, state.stats(k_plus), y, false);
  const double lp_minus = detail::log_predictive_impl(model, state.stats(k_minus), y, true);
  return count_terms + (lp_plus - lp_minus);
}

/// Closed-form log marginal likelihood of the observations indexed by
/// `members` under a single cluster, integrating the atom against p0.
inline double log_marginal_likelihood(const ModelSpec& model, const Dataset& data,
                                      std::span<const std::size_t> members) {
  const double m = static_cast<double>(members.size());
  if (members.empty()) return 0.0;
  switch (model.kind) {
    case ModelKind::PriorOnly:
      return 0.0;
    case ModelKind::GaussianIso: {
      double total = 0.0;
      for (std::size_t d = 0; d < model.dim; ++d) {
        double mean = 0.0;
        for (std::size_t i : members) mean += data.row(i)[d];
        mean /= m;
        double ss = 0.0;
        for (std::size_t i : members) {
          const double r = data.row(i)[d] - mean;
          ss += r * r;
        }
        const double spread = model.sigma2 + m * model.sigma02;
        const double dm = mean - model.theta0[d];
        total += -0.5 * m * std::log(2.0 * std::numbers::pi * model.sigma2) +
                 0.5 * std::log(model.sigma2 / spread) - 0.5 * ss / model.sigma2 - 0.5 * m * dm * dm / spread;
      }
      return total;
    }
    case ModelKind::PoissonGamma: {
      double t = 0.0;
      double log_fact = 0.0;
      for (std::size_t i : members) {
        const double y = data.row(i)[0];
        t += y;
        log_fact += std::lgamma(y + 1.0);
      }
      return model.beta1 * std::log(model.beta2) - std::lgamma(model.beta1) + std::lgamma(model.beta1 + t) -
             (model.beta1 + t) * std::log(model.beta2 + m) - log_fact;
    }
  }
  return 0.0;
}

}  // namespace liftmix
