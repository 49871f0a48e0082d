#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace liftmix {

enum class ModelKind { PriorOnly, GaussianIso, PoissonGamma };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::PriorOnly: return "prior";
    case ModelKind::GaussianIso: return "gaussian";
    case ModelKind::PoissonGamma: return "poisson";
  }
  return "unknown";
}

inline ModelKind parse_model_kind(std::string_view name) {
  if (name == "prior" || name == "prior-only" || name == "prior_only") return ModelKind::PriorOnly;
  if (name == "gaussian" || name == "gaussian-iso" || name == "gaussian_iso") return ModelKind::GaussianIso;
  if (name == "poisson" || name == "poisson-gamma" || name == "poisson_gamma") return ModelKind::PoissonGamma;
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

/// Finite mixture with Dirichlet(alpha) weights and a conjugate atom prior.
/// GaussianIso: f = N(theta, sigma2 I_p), p0 = N(theta0, sigma02 I_p).
/// PoissonGamma: f = Po(theta), p0 = Gamma(beta1, rate beta2).
struct ModelSpec {
  ModelKind kind = ModelKind::PriorOnly;
  std::vector<double> alpha;
  std::size_t dim = 0;
  std::vector<double> theta0;
  double sigma2 = 1.0;
  double sigma02 = 1.0;
  double beta1 = 1.0;
  double beta2 = 1.0;

  std::size_t num_components() const { return alpha.size(); }
  double alpha_sum() const { return std::accumulate(alpha.begin(), alpha.end(), 0.0); }

  void validate() const {
    if (alpha.size() < 2) throw std::invalid_argument("model needs K >= 2 components");
    for (double a : alpha) {
      if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("alpha entries must be positive and finite");
    }
    switch (kind) {
      case ModelKind::PriorOnly:
        break;
      case ModelKind::GaussianIso:
        if (dim < 1) throw std::invalid_argument("gaussian model needs dim >= 1");
        if (theta0.size() != dim) throw std::invalid_argument("theta0 length must equal dim");
        if (!(sigma2 > 0.0) || !(sigma02 > 0.0)) throw std::invalid_argument("gaussian variances must be positive");
        break;
      case ModelKind::PoissonGamma:
        if (!(beta1 > 0.0) || !(beta2 > 0.0)) throw std::invalid_argument("gamma prior parameters must be positive");
        break;
    }
  }

  static ModelSpec prior_only(std::vector<double> alpha) {
    ModelSpec m;
    m.kind = ModelKind::PriorOnly;
    m.alpha = std::move(alpha);
    m.validate();
    return m;
  }

  static ModelSpec gaussian(std::vector<double> alpha, std::vector<double> theta0, double sigma2, double sigma02) {
    ModelSpec m;
    m.kind = ModelKind::GaussianIso;
    m.alpha = std::move(alpha);
    m.dim = theta0.size();
    m.theta0 = std::move(theta0);
    m.sigma2 = sigma2;
    m.sigma02 = sigma02;
    m.validate();
    return m;
  }

  static ModelSpec poisson_gamma(std::vector<double> alpha, double beta1, double beta2) {
    ModelSpec m;
    m.kind = ModelKind::PoissonGamma;
    m.alpha = std::move(alpha);
    m.dim = 1;
    m.beta1 = beta1;
    m.beta2 = beta2;
    m.validate();
    return m;
  }
};

/// Observations stored row-major; PriorOnly datasets carry only n.
class Dataset {
 public:
  Dataset() = default;

  static Dataset prior_only(std::size_t n) {
    if (n < 1) throw std::invalid_argument("dataset needs n >= 1");
    Dataset d;
    d.n_ = n;
    return d;
  }

  static Dataset from_values(std::size_t dim, std::vector<double> values) {
    if (dim < 1) throw std::invalid_argument("dataset dim must be >= 1");
    if (values.empty() || values.size() % dim != 0) {
      throw std::invalid_argument("dataset values must be a non-empty multiple of dim");
    }
    Dataset d;
    d.dim_ = dim;
    d.n_ = values.size() / dim;
    d.values_ = std::move(values);
    return d;
  }

  std::size_t size() const { return n_; }
  std::size_t dim() const { return dim_; }
  bool has_observations() const { return dim_ > 0; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  std::span<const double> values() const { return values_; }

  /// Throws if the observations cannot be used with `model`.
  void check_compatible(const ModelSpec& model) const {
    switch (model.kind) {
      case ModelKind::PriorOnly:
        return;
      case ModelKind::GaussianIso:
        if (dim_ != model.dim) throw std::invalid_argument("dataset dimension does not match model dim");
        return;
      case ModelKind::PoissonGamma:
        if (dim_ != 1) throw std::invalid_argument("poisson datasets have exactly one column");
        for (double v : values_) {
          if (!(v >= 0.0) || v != std::floor(v)) {
            throw std::invalid_argument("poisson observations must be non-negative integers");
          }
        }
        return;
    }
  }

 private:
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

}  // namespace liftmix
