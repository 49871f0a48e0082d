#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include "liftmix/model.hpp"
#include "liftmix/predictive.hpp"
#include "liftmix/velocity.hpp"

namespace liftmix::exact {

/// Upper bound on enumerated states (allocations times velocity tables).
inline constexpr std::size_t kMaxStates = 1'000'000;

/// Largest state count handled by the dense fundamental-matrix route.
inline constexpr std::size_t kMaxDenseStates = 3000;

using SparseKernel = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class KernelKind { MG, R, NR, QNR };

inline std::string_view to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::MG: return "mg";
    case KernelKind::R: return "r";
    case KernelKind::NR: return "nr";
    case KernelKind::QNR: return "qnr";
  }
  return "unknown";
}

inline KernelKind parse_kernel_kind(std::string_view s) {
  if (s == "mg") return KernelKind::MG;
  if (s == "r") return KernelKind::R;
  if (s == "nr") return KernelKind::NR;
  if (s == "qnr") return KernelKind::QNR;
  throw std::invalid_argument("unknown kernel kind: " + std::string(s));
}

inline bool is_lifted(KernelKind kind) { return kind == KernelKind::NR || kind == KernelKind::QNR; }

/// Index arithmetic for [K]^n, optionally times {-1,+1}^{K(K-1)/2}.
///
/// Allocation c has index sum_i c_i K^i. A lifted state has index
/// alloc * 2^P + bits, with bit p set when pair p points from kp to k.
class StateSpace {
 public:
  StateSpace() = default;
  StateSpace(std::size_t n, std::size_t K, bool lifted) : n_(n), K_(K), lifted_(lifted) {
    if (n < 1 || K < 2) throw std::invalid_argument("state space needs n >= 1 and K >= 2");
    // Guard computed in floating point to avoid overflow.
    const double allocs = std::pow(static_cast<double>(K), static_cast<double>(n));
    const double tables = lifted ? std::pow(2.0, static_cast<double>(num_pairs(K))) : 1.0;
    if (allocs * tables > static_cast<double>(kMaxStates)) {
      throw std::invalid_argument("state space too large for enumeration (K^n * 2^(K(K-1)/2) > 1e6)");
    }
    num_alloc_ = static_cast<std::size_t>(allocs + 0.5);
    num_vel_ = static_cast<std::size_t>(tables + 0.5);
    powers_.resize(n);
    std::size_t p = 1;
    for (std::size_t i = 0; i < n; ++i, p *= K) powers_[i] = p;
  }

  std::size_t n() const { return n_; }
  std::size_t num_components() const { return K_; }
  bool lifted() const { return lifted_; }
  std::size_t num_allocations() const { return num_alloc_; }
  std::size_t num_velocities() const { return num_vel_; }
  std::size_t size() const { return num_alloc_ * num_vel_; }

  std::size_t alloc_index(std::size_t state) const { return state / num_vel_; }
  std::uint64_t velocity_bits(std::size_t state) const { return state % num_vel_; }
  std::size_t state_index(std::size_t alloc, std::uint64_t bits) const { return alloc * num_vel_ + bits; }

  std::vector<std::size_t> decode(std::size_t alloc) const {
    std::vector<std::size_t> labels(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      labels[i] = alloc % K_;
      alloc /= K_;
    }
    return labels;
  }

  std::size_t encode(const std::vector<std::size_t>& labels) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n_; ++i) idx += labels[i] * powers_[i];
    return idx;
  }

  /// Index of the allocation obtained by relabelling point i from `from` to `to`.
  std::size_t moved(std::size_t alloc, std::size_t i, std::size_t from, std::size_t to) const {
    return alloc + to * powers_[i] - from * powers_[i];
  }

 private:
  std::size_t n_ = 0;
  std::size_t K_ = 0;
  bool lifted_ = false;
  std::size_t num_alloc_ = 0;
  std::size_t num_vel_ = 1;
  std::vector<std::size_t> powers_;
};

struct EnumeratedKernel {
  KernelKind kind = KernelKind::MG;
  StateSpace space;
  /// Target over the state list: pi(c), or pi(c) / 2^P on lifted states.
  std::vector<double> target;
  SparseKernel matrix;

  std::size_t size() const { return space.size(); }

  double max_row_sum_error() const {
    double err = 0.0;
    for (Eigen::Index r = 0; r < matrix.outerSize(); ++r) {
      double s = 0.0;
      for (SparseKernel::InnerIterator it(matrix, r); it; ++it) s += it.value();
      err = std::max(err, std::abs(s - 1.0));
    }
    return err;
  }

  double min_entry() const {
    double m = 0.0;
    for (Eigen::Index r = 0; r < matrix.outerSize(); ++r) {
      for (SparseKernel::InnerIterator it(matrix, r); it; ++it) m = std::min(m, it.value());
    }
    return m;
  }

  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix); }
};

/// Normalised pi(c) over [K]^n from sum_k [lgamma(alpha_k + n_k) + log m(Y_{c=k})].
/// Pass Dataset::prior_only(n) for the prior case.
inline std::vector<double> enumerate_target(const ModelSpec& model, const Dataset& data, bool lifted = false) {
  model.validate();
  data.check_compatible(model);
  const std::size_t n = data.size();
  const std::size_t K = model.num_components();
  const StateSpace space(n, K, lifted);
  std::vector<double> logp(space.num_allocations());
  std::vector<std::vector<std::size_t>> members(K);
  for (std::size_t a = 0; a < logp.size(); ++a) {
    const auto labels = space.decode(a);
    for (auto& m : members) m.clear();
    for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(i);
    double lp = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      lp += std::lgamma(model.alpha[k] + static_cast<double>(members[k].size()));
      lp += log_marginal_likelihood(model, data, members[k]);
    }
    logp[a] = lp;
  }
  const double top = *std::max_element(logp.begin(), logp.end());
  double total = 0.0;
  for (double& v : logp) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : logp) v /= total;
  return logp;
}

namespace detail {

using Branch = std::pair<std::size_t, double>;

inline std::vector<std::size_t> counts_of(const std::vector<std::size_t>& labels, std::size_t K) {
  std::vector<std::size_t> c(K, 0);
  for (std::size_t l : labels) ++c[l];
  return c;
}

// min(1, r) with r = (n_src / (n_tgt + 1)) pi(c') / pi(c).
inline double pair_acceptance(const std::vector<double>& pi, std::size_t a, std::size_t a_new, double n_src,
                              double n_tgt) {
  if (pi[a] <= 0.0) return 1.0;
  const double r = (n_src / (n_tgt + 1.0)) * pi[a_new] / pi[a];
  return std::min(1.0, r);
}

// Transitions of the lifted kernel on pair (k, kp) from lifted state `state`,
// appended to `out` with weight `scale`.
inline void lifted_pair_branches(const StateSpace& space, const std::vector<double>& pi,
                                 const std::vector<std::size_t>& labels, const std::vector<std::size_t>& counts,
                                 std::size_t state, std::size_t k, std::size_t kp, double xi, double scale,
                                 std::vector<Branch>& out) {
  const std::size_t K = space.num_components();
  const std::size_t a = space.alloc_index(state);
  const std::uint64_t bits = space.velocity_bits(state);
  const std::uint64_t mask = std::uint64_t{1} << pair_index(K, k, kp);
  const double rho = xi / static_cast<double>(space.n());

  auto post = [&](std::size_t alloc, std::uint64_t b, double w) {
    if (w <= 0.0) return;
    if (rho < 1.0) out.emplace_back(space.state_index(alloc, b), scale * w * (1.0 - rho));
    if (rho > 0.0) out.emplace_back(space.state_index(alloc, b ^ mask), scale * w * rho);
  };

  for (int pre = 0; pre < 2; ++pre) {
    const double w_pre = pre == 0 ? 1.0 - rho : rho;
    if (w_pre <= 0.0) continue;
    const std::uint64_t b1 = pre == 0 ? bits : bits ^ mask;
    const bool forward = (b1 & mask) == 0;
    const std::size_t src = forward ? k : kp;
    const std::size_t tgt = forward ? kp : k;
    if (counts[src] == 0) {
      post(a, b1 ^ mask, w_pre);
      continue;
    }
    const double n_src = static_cast<double>(counts[src]);
    const double n_tgt = static_cast<double>(counts[tgt]);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != src) continue;
      const std::size_t a_new = space.moved(a, i, src, tgt);
      const double acc = pair_acceptance(pi, a, a_new, n_src, n_tgt);
      post(a_new, b1, w_pre * acc / n_src);
      post(a, b1 ^ mask, w_pre * (1.0 - acc) / n_src);
    }
  }
}

inline SparseKernel from_triplets(std::size_t N, std::vector<Eigen::Triplet<double>>& triplets) {
  SparseKernel m(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

inline void push_branches(std::size_t row, std::vector<Branch>& branches,
                          std::vector<Eigen::Triplet<double>>& triplets) {
  for (const auto& [col, w] : branches) {
    if (w != 0.0) triplets.emplace_back(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col), w);
  }
  branches.clear();
}

inline SparseKernel build_mg(const StateSpace& space, const std::vector<double>& pi) {
  const std::size_t n = space.n();
  const std::size_t K = space.num_components();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(space.size() * n * K);
  std::vector<double> w(K);
  for (std::size_t a = 0; a < space.num_allocations(); ++a) {
    const auto labels = space.decode(a);
    for (std::size_t i = 0; i < n; ++i) {
      double total = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        w[k] = pi[space.moved(a, i, labels[i], k)];
        total += w[k];
      }
      for (std::size_t k = 0; k < K; ++k) {
        if (w[k] > 0.0) {
          triplets.emplace_back(static_cast<Eigen::Index>(a),
                                static_cast<Eigen::Index>(space.moved(a, i, labels[i], k)),
                                w[k] / (total * static_cast<double>(n)));
        }
      }
    }
  }
  return from_triplets(space.size(), triplets);
}

inline SparseKernel build_r(const StateSpace& space, const std::vector<double>& pi) {
  const std::size_t n = space.n();
  const std::size_t K = space.num_components();
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<Branch> branches;
  for (std::size_t a = 0; a < space.num_allocations(); ++a) {
    const auto labels = space.decode(a);
    const auto counts = counts_of(labels, K);
    for (std::size_t k = 0; k + 1 < K; ++k) {
      for (std::size_t kp = k + 1; kp < K; ++kp) {
        const double p_pair = static_cast<double>(counts[k] + counts[kp]) / static_cast<double>((K - 1) * n);
        if (p_pair == 0.0) continue;
        for (int dir = 0; dir < 2; ++dir) {
          const std::size_t src = dir == 0 ? k : kp;
          const std::size_t tgt = dir == 0 ? kp : k;
          const double w_dir = 0.5 * p_pair;
          if (counts[src] == 0) {
            branches.emplace_back(a, w_dir);
            continue;
          }
          const double n_src = static_cast<double>(counts[src]);
          const double n_tgt = static_cast<double>(counts[tgt]);
          for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] != src) continue;
            const std::size_t a_new = space.moved(a, i, src, tgt);
            const double acc = pair_acceptance(pi, a, a_new, n_src, n_tgt);
            branches.emplace_back(a_new, w_dir * acc / n_src);
            branches.emplace_back(a, w_dir * (1.0 - acc) / n_src);
          }
        }
      }
    }
    push_branches(a, branches, triplets);
  }
  return from_triplets(space.size(), triplets);
}

inline SparseKernel build_nr(const StateSpace& space, const std::vector<double>& pi, double xi) {
  const std::size_t n = space.n();
  const std::size_t K = space.num_components();
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<Branch> branches;
  for (std::size_t state = 0; state < space.size(); ++state) {
    const auto labels = space.decode(space.alloc_index(state));
    const auto counts = counts_of(labels, K);
    for (std::size_t k = 0; k + 1 < K; ++k) {
      for (std::size_t kp = k + 1; kp < K; ++kp) {
        const double p_pair = static_cast<double>(counts[k] + counts[kp]) / static_cast<double>((K - 1) * n);
        if (p_pair == 0.0) continue;
        lifted_pair_branches(space, pi, labels, counts, state, k, kp, xi, p_pair, branches);
      }
    }
    push_branches(state, branches, triplets);
  }
  return from_triplets(space.size(), triplets);
}

// Sum_{t>=1} q (1-q)^{t-1} B^t, truncated once the remaining tail mass
// (1-q)^T drops to 1e-14.
inline Eigen::MatrixXd geometric_mixture_truncated(const Eigen::MatrixXd& B, double q) {
  if (q >= 1.0) return B;
  const auto T = static_cast<std::size_t>(std::ceil(std::log(1e-14) / std::log(1.0 - q)));
  Eigen::MatrixXd power = B;
  Eigen::MatrixXd sum = q * B;
  double w = q;
  for (std::size_t t = 2; t <= T; ++t) {
    power = power * B;
    w *= 1.0 - q;
    sum += w * power;
  }
  return sum;
}

inline Eigen::MatrixXd geometric_mixture_closed_form(const Eigen::MatrixXd& B, double q) {
  if (q >= 1.0) return B;
  const Eigen::Index m = B.rows();
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(m, m) - (1.0 - q) * B;
  return q * B * A.partialPivLu().inverse();
}

}  // namespace detail

enum class GeometricSum { Truncated, ClosedForm };

namespace detail {

// Geometric-run kernel. For a fixed pair the lifted kernel only moves points
// between k and kp and flips bit (k, kp), so it is block diagonal; each block
// fixes the labels outside {k, kp} and the other velocity bits.
inline SparseKernel build_qnr(const StateSpace& space, const std::vector<double>& pi, double xi, double s,
                              GeometricSum method) {
  const std::size_t n = space.n();
  const std::size_t K = space.num_components();
  const double pair_weight = 1.0 / static_cast<double>(num_pairs(K));
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<Branch> branches;
  std::vector<char> done(space.size());

  for (std::size_t k = 0; k + 1 < K; ++k) {
    for (std::size_t kp = k + 1; kp < K; ++kp) {
      const std::uint64_t mask = std::uint64_t{1} << pair_index(K, k, kp);
      std::fill(done.begin(), done.end(), 0);
      for (std::size_t root = 0; root < space.size(); ++root) {
        if (done[root]) continue;
        auto labels = space.decode(space.alloc_index(root));
        std::vector<std::size_t> slots;
        for (std::size_t i = 0; i < n; ++i) {
          if (labels[i] == k || labels[i] == kp) slots.push_back(i);
        }
        const std::size_t m = slots.size();
        const std::uint64_t other_bits = space.velocity_bits(root) & ~mask;

        // Local index: (assignment bitmask over slots) * 2 + pair bit.
        const std::size_t block = (std::size_t{1} << m) * 2;
        std::vector<std::size_t> global(block);
        std::unordered_map<std::size_t, std::size_t> local;
        local.reserve(block);
        for (std::size_t assign = 0; assign < (std::size_t{1} << m); ++assign) {
          for (std::size_t j = 0; j < m; ++j) labels[slots[j]] = ((assign >> j) & 1U) ? kp : k;
          const std::size_t a = space.encode(labels);
          for (std::size_t vb = 0; vb < 2; ++vb) {
            const std::size_t g = space.state_index(a, other_bits | (vb ? mask : 0));
            global[assign * 2 + vb] = g;
            local.emplace(g, assign * 2 + vb);
            done[g] = 1;
          }
        }

        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(block), static_cast<Eigen::Index>(block));
        for (std::size_t r = 0; r < block; ++r) {
          const std::size_t g = global[r];
          const auto lab = space.decode(space.alloc_index(g));
          const auto counts = counts_of(lab, K);
          lifted_pair_branches(space, pi, lab, counts, g, k, kp, xi, 1.0, branches);
          for (const auto& [col, w] : branches) {
            B(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(local.at(col))) += w;
          }
          branches.clear();
        }

        const double q = m == 0 ? 1.0 : std::min(1.0, s / static_cast<double>(m));
        const Eigen::MatrixXd G = method == GeometricSum::ClosedForm ? geometric_mixture_closed_form(B, q)
                                                                     : geometric_mixture_truncated(B, q);
        for (std::size_t r = 0; r < block; ++r) {
          for (std::size_t c = 0; c < block; ++c) {
            const double v = G(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            if (v != 0.0) {
              triplets.emplace_back(static_cast<Eigen::Index>(global[r]), static_cast<Eigen::Index>(global[c]),
                                    pair_weight * v);
            }
          }
        }
      }
    }
  }
  return from_triplets(space.size(), triplets);
}

}  // namespace detail

/// Exact transition matrix of the chosen kernel targeting `pi` (a normalised
/// vector over [K]^n as returned by enumerate_target). Lifted kernels are
/// built on [K]^n x {-1,+1}^{K(K-1)/2} with the uniform velocity marginal.
inline EnumeratedKernel build_kernel(KernelKind kind, const std::vector<double>& pi, std::size_t n, std::size_t K,
                                     double xi = 0.0, double s = 1.0,
                                     GeometricSum method = GeometricSum::ClosedForm) {
  if (xi < 0.0) throw std::invalid_argument("xi must be non-negative");
  if (kind == KernelKind::QNR && !(s > 0.0)) throw std::invalid_argument("s must be positive");
  EnumeratedKernel out;
  out.kind = kind;
  out.space = StateSpace(n, K, is_lifted(kind));
  if (pi.size() != out.space.num_allocations()) throw std::invalid_argument("target size must be K^n");
  switch (kind) {
    case KernelKind::MG: out.matrix = detail::build_mg(out.space, pi); break;
    case KernelKind::R: out.matrix = detail::build_r(out.space, pi); break;
    case KernelKind::NR: out.matrix = detail::build_nr(out.space, pi, xi); break;
    case KernelKind::QNR: out.matrix = detail::build_qnr(out.space, pi, xi, s, method); break;
  }
  const std::size_t nv = out.space.num_velocities();
  out.target.resize(out.space.size());
  for (std::size_t st = 0; st < out.target.size(); ++st) {
    out.target[st] = pi[out.space.alloc_index(st)] / static_cast<double>(nv);
  }
  return out;
}

inline EnumeratedKernel build_kernel(KernelKind kind, const ModelSpec& model, const Dataset& data, double xi = 0.0,
                                     double s = 1.0, GeometricSum method = GeometricSum::ClosedForm) {
  const auto pi = enumerate_target(model, data, is_lifted(kind));
  return build_kernel(kind, pi, data.size(), model.num_components(), xi, s, method);
}

/// max_j |(pi^T P)_j - pi_j|.
inline double check_invariance(const EnumeratedKernel& kernel) {
  const Eigen::Map<const Eigen::VectorXd> pi(kernel.target.data(), static_cast<Eigen::Index>(kernel.target.size()));
  const Eigen::VectorXd pushed = kernel.matrix.transpose() * pi;
  return (pushed - pi).cwiseAbs().maxCoeff();
}

/// max_{x,y} |pi(x) P(x,y) - pi(y) P(y,x)|.
inline double detailed_balance_violation(const EnumeratedKernel& kernel) {
  const Eigen::Map<const Eigen::VectorXd> pi(kernel.target.data(), static_cast<Eigen::Index>(kernel.target.size()));
  const Eigen::SparseMatrix<double> flux = pi.asDiagonal() * Eigen::SparseMatrix<double>(kernel.matrix);
  const Eigen::SparseMatrix<double> flux_t = flux.transpose();
  const Eigen::SparseMatrix<double> diff = flux - flux_t;
  double m = 0.0;
  for (Eigen::Index c = 0; c < diff.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(diff, c); it; ++it) m = std::max(m, std::abs(it.value()));
  }
  return m;
}

/// max over off-diagonal (x, y) of P_mg(x,y)/(2(K-1)) - P_r(x,y); <= 0 when
/// P_r dominates P_mg / (2(K-1)) entrywise.
inline double minorization_violation(const EnumeratedKernel& mg, const EnumeratedKernel& r) {
  const double c = 2.0 * static_cast<double>(mg.space.num_components() - 1);
  const SparseKernel diff = mg.matrix / c - r.matrix;
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index row = 0; row < diff.outerSize(); ++row) {
    for (SparseKernel::InnerIterator it(diff, row); it; ++it) {
      if (it.row() != it.col()) m = std::max(m, it.value());
    }
  }
  return m;
}

/// Functional on allocations, extended to lifted states through the allocation.
using AllocationFunctional = std::function<double(const std::vector<std::size_t>&)>;

inline Eigen::VectorXd evaluate(const StateSpace& space, const AllocationFunctional& g) {
  Eigen::VectorXd values(static_cast<Eigen::Index>(space.num_allocations()));
  for (std::size_t a = 0; a < space.num_allocations(); ++a) values(static_cast<Eigen::Index>(a)) = g(space.decode(a));
  Eigen::VectorXd out(static_cast<Eigen::Index>(space.size()));
  for (std::size_t st = 0; st < space.size(); ++st) {
    out(static_cast<Eigen::Index>(st)) = values(static_cast<Eigen::Index>(space.alloc_index(st)));
  }
  return out;
}

inline double stationary_variance(const EnumeratedKernel& kernel, const Eigen::VectorXd& g) {
  const Eigen::Map<const Eigen::VectorXd> pi(kernel.target.data(), static_cast<Eigen::Index>(kernel.target.size()));
  const double mean = pi.dot(g);
  const Eigen::VectorXd centred = g.array() - mean;
  return pi.dot(centred.cwiseProduct(centred));
}

/// Var_pi(g) + 2 <g_bar, (Z - I) g_bar>_pi with Z = (I - P + 1 pi^T)^{-1},
/// solved densely with partial pivoting.
inline double asymptotic_variance_dense(const EnumeratedKernel& kernel, const Eigen::VectorXd& g) {
  const std::size_t N = kernel.size();
  if (N > kMaxDenseStates) throw std::invalid_argument("dense asymptotic variance limited to 3000 states");
  const Eigen::Map<const Eigen::VectorXd> pi(kernel.target.data(), static_cast<Eigen::Index>(N));
  const Eigen::VectorXd centred = g.array() - pi.dot(g);
  Eigen::MatrixXd A = -kernel.dense();
  A.diagonal().array() += 1.0;
  A += Eigen::VectorXd::Ones(static_cast<Eigen::Index>(N)) * pi.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> rank_check(A);
  if (!rank_check.isInvertible()) throw std::runtime_error("kernel is reducible: fundamental matrix is singular");
  const Eigen::VectorXd z = rank_check.solve(centred);
  const double var = pi.dot(centred.cwiseProduct(centred));
  return var + 2.0 * pi.dot(centred.cwiseProduct(z - centred));
}

/// True when every state reaches `ref` and is reached from it under P.
inline bool is_irreducible(const SparseKernel& P, Eigen::Index ref) {
  auto reach_all = [ref](const SparseKernel& M) {
    std::vector<char> seen(static_cast<std::size_t>(M.rows()), 0);
    std::vector<Eigen::Index> stack{ref};
    seen[static_cast<std::size_t>(ref)] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const Eigen::Index r = stack.back();
      stack.pop_back();
      for (SparseKernel::InnerIterator it(M, r); it; ++it) {
        if (it.value() > 0.0 && !seen[static_cast<std::size_t>(it.col())]) {
          seen[static_cast<std::size_t>(it.col())] = 1;
          ++count;
          stack.push_back(it.col());
        }
      }
    }
    return count == static_cast<std::size_t>(M.rows());
  };
  const SparseKernel Pt = P.transpose();
  return reach_all(P) && reach_all(Pt);
}

/// Same quantity through the Poisson equation (I - P) h = g_bar with one
/// reference state pinned to h = 0:
/// Var = 2 <g_bar, h>_pi - <g_bar, g_bar>_pi.
/// Solved by Jacobi-preconditioned BiCGSTAB to 1e-14 relative residual,
/// falling back to sparse LU when that does not converge.
inline double asymptotic_variance_exact(const EnumeratedKernel& kernel, const Eigen::VectorXd& g) {
  const std::size_t N = kernel.size();
  const Eigen::Map<const Eigen::VectorXd> pi(kernel.target.data(), static_cast<Eigen::Index>(N));
  const Eigen::VectorXd centred = g.array() - pi.dot(g);
  if (N == 1) return 0.0;
  Eigen::Index ref = 0;
  pi.maxCoeff(&ref);
  if (!is_irreducible(kernel.matrix, ref)) throw std::runtime_error("kernel is reducible");
  auto shrink = [ref](Eigen::Index i) { return i < ref ? i : i - 1; };

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(kernel.matrix.nonZeros()) + N);
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(N); ++r) {
    if (r == ref) continue;
    triplets.emplace_back(shrink(r), shrink(r), 1.0);
    for (SparseKernel::InnerIterator it(kernel.matrix, r); it; ++it) {
      if (it.col() == ref) continue;
      triplets.emplace_back(shrink(r), shrink(it.col()), -it.value());
    }
  }
  Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(N - 1), static_cast<Eigen::Index>(N - 1));
  A.setFromTriplets(triplets.begin(), triplets.end());
  A.makeCompressed();
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(N - 1));
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(N); ++r) {
    if (r != ref) rhs(shrink(r)) = centred(r);
  }
  Eigen::VectorXd h_reduced;
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::DiagonalPreconditioner<double>> iterative;
  iterative.setTolerance(1e-14);
  iterative.setMaxIterations(20000);
  iterative.compute(A);
  h_reduced = iterative.solve(rhs);
  if (iterative.info() != Eigen::Success || !h_reduced.allFinite()) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw std::runtime_error("kernel is reducible: Poisson system is singular");
    h_reduced = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !h_reduced.allFinite()) {
      throw std::runtime_error("kernel is reducible: Poisson solve failed");
    }
  }
  Eigen::VectorXd h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N));
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(N); ++r) {
    if (r != ref) h(r) = h_reduced(shrink(r));
  }
  return 2.0 * pi.dot(centred.cwiseProduct(h)) - pi.dot(centred.cwiseProduct(centred));
}

/// Second-largest eigenvalue of the birth-death chain of n_1 under the
/// prior-only Gibbs kernel with K = 2.
inline double second_eigenvalue_lumped_mg(std::size_t n, double alpha1, double alpha2) {
  if (n < 1 || !(alpha1 > 0.0) || !(alpha2 > 0.0)) throw std::invalid_argument("need n >= 1 and alpha > 0");
  const auto N = static_cast<Eigen::Index>(n + 1);
  const double dn = static_cast<double>(n);
  const double denom = alpha1 + alpha2 + dn - 1.0;
  Eigen::VectorXd up(N), down(N);
  for (Eigen::Index j = 0; j < N; ++j) {
    const double x = static_cast<double>(j);
    up(j) = ((dn - x) / dn) * (alpha1 + x) / denom;
    down(j) = (x / dn) * (alpha2 + dn - x) / denom;
  }
  // Symmetrise with the stationary weights of the reversible chain:
  // S(j, j+1) = sqrt(up_j * down_{j+1}).
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(N, N);
  for (Eigen::Index j = 0; j < N; ++j) {
    S(j, j) = 1.0 - up(j) - down(j);
    if (j + 1 < N) {
      const double off = std::sqrt(up(j) * down(j + 1));
      S(j, j + 1) = off;
      S(j + 1, j) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(S, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  return N >= 2 ? ev(N - 2) : ev(0);
}

/// max_k n_k / n.
inline double largest_cluster_proportion(const std::vector<std::size_t>& labels, std::size_t K) {
  std::vector<std::size_t> c(K, 0);
  for (std::size_t l : labels) ++c[l];
  return static_cast<double>(*std::max_element(c.begin(), c.end())) / static_cast<double>(labels.size());
}

/// The three test functionals: largest-cluster proportion, n_1/n, and the
/// indicator of the reference allocation c_i = i mod K.
inline std::vector<std::pair<std::string, AllocationFunctional>> test_functionals(std::size_t K) {
  std::vector<std::pair<std::string, AllocationFunctional>> out;
  out.emplace_back("largest-share", [K](const std::vector<std::size_t>& c) { return largest_cluster_proportion(c, K); });
  out.emplace_back("share-1", [](const std::vector<std::size_t>& c) {
    return static_cast<double>(std::count(c.begin(), c.end(), std::size_t{0})) / static_cast<double>(c.size());
  });
  out.emplace_back("reference-indicator", [K](const std::vector<std::size_t>& c) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i] != i % K) return 0.0;
    }
    return 1.0;
  });
  return out;
}

/// Allocations c = (1, ..., 1, 2, 3) and c' = (1, ..., 1, 2, 2) at K = 3
/// (0-based labels internally).
inline std::pair<std::size_t, std::size_t> singleton_move_pair(const StateSpace& space) {
  if (space.num_components() != 3 || space.n() < 3) throw std::invalid_argument("needs K = 3 and n >= 3");
  const std::size_t n = space.n();
  std::vector<std::size_t> c(n, 0);
  c[n - 2] = 1;
  c[n - 1] = 2;
  std::vector<std::size_t> cp = c;
  cp[n - 1] = 1;
  return {space.encode(c), space.encode(cp)};
}

}  // namespace liftmix::exact
