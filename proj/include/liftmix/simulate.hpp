#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "liftmix/model.hpp"
#include "liftmix/random.hpp"

namespace liftmix {

/// Dataset together with the mixture that generated it.
struct SimulatedData {
  Dataset data;
  std::vector<double> weights;
  /// K rows of `dim` atom coordinates, row-major. Empty for PriorOnly.
  std::vector<double> atoms;
  std::vector<std::size_t> true_labels;
};

/// Draw w ~ Dir(alpha), theta_k iid from p0, then Y_i iid from the mixture.
template <class Gen>
SimulatedData simulate_dataset(const ModelSpec& model, std::size_t n, Gen& gen) {
  model.validate();
  if (n < 1) throw std::invalid_argument("simulate_dataset needs n >= 1");
  const std::size_t K = model.num_components();
  SimulatedData out;
  out.weights = sample_dirichlet(std::span<const double>(model.alpha), gen);

  if (model.kind == ModelKind::PriorOnly) {
    out.data = Dataset::prior_only(n);
    out.true_labels.resize(n);
    std::discrete_distribution<std::size_t> pick(out.weights.begin(), out.weights.end());
    for (auto& l : out.true_labels) l = pick(gen);
    return out;
  }

  const std::size_t dim = model.kind == ModelKind::GaussianIso ? model.dim : 1;
  out.atoms.resize(K * dim);
  if (model.kind == ModelKind::GaussianIso) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd0 = std::sqrt(model.sigma02);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t d = 0; d < dim; ++d) out.atoms[k * dim + d] = model.theta0[d] + sd0 * normal(gen);
    }
  } else {
    std::gamma_distribution<double> gamma(model.beta1, 1.0 / model.beta2);
    for (std::size_t k = 0; k < K; ++k) out.atoms[k] = gamma(gen);
  }

  std::vector<double> values(n * dim);
  out.true_labels.resize(n);
  std::discrete_distribution<std::size_t> pick(out.weights.begin(), out.weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(model.sigma2);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = pick(gen);
    out.true_labels[i] = k;
    if (model.kind == ModelKind::GaussianIso) {
      for (std::size_t d = 0; d < dim; ++d) values[i * dim + d] = out.atoms[k * dim + d] + sd * normal(gen);
    } else {
      std::poisson_distribution<long long> poisson(out.atoms[k]);
      values[i] = static_cast<double>(poisson(gen));
    }
  }
  out.data = Dataset::from_values(dim, std::move(values));
  return out;
}

template <class Gen = Rng>
SimulatedData simulate_dataset(const ModelSpec& model, std::size_t n, std::uint64_t seed) {
  Gen gen(seed);
  return simulate_dataset(model, n, gen);
}

/// One-dimensional Gaussian mixture with fixed weights, means and a shared
/// variance, e.g. 0.9 N(0.9, 1) + 0.1 N(-0.9, 1).
struct FixedMixture {
  std::vector<double> weights;
  std::vector<double> means;
  double variance = 1.0;

  void validate() const {
    if (weights.empty() || weights.size() != means.size()) {
      throw std::invalid_argument("fixed mixture needs matching non-empty weights and means");
    }
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("fixed mixture weights must be non-negative");
      total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("fixed mixture weights must not all be zero");
    if (!(variance > 0.0)) throw std::invalid_argument("fixed mixture variance must be positive");
  }
};

template <class Gen>
SimulatedData simulate_fixed_mixture(const FixedMixture& mixture, std::size_t n, Gen& gen) {
  mixture.validate();
  if (n < 1) throw std::invalid_argument("simulate_fixed_mixture needs n >= 1");
  SimulatedData out;
  double total = 0.0;
  for (double w : mixture.weights) total += w;
  for (double w : mixture.weights) out.weights.push_back(w / total);
  out.atoms = mixture.means;
  std::discrete_distribution<std::size_t> pick(out.weights.begin(), out.weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(mixture.variance);
  std::vector<double> values(n);
  out.true_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = pick(gen);
    out.true_labels[i] = k;
    values[i] = mixture.means[k] + sd * normal(gen);
  }
  out.data = Dataset::from_values(1, std::move(values));
  return out;
}

}  // namespace liftmix
