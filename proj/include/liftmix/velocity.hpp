#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "liftmix/random.hpp"

namespace liftmix {

/// Number of unordered cluster pairs, K(K-1)/2.
constexpr std::size_t num_pairs(std::size_t K) { return K * (K - 1) / 2; }

/// Position of the pair (k, kp), k < kp, in lexicographic order.
constexpr std::size_t pair_index(std::size_t K, std::size_t k, std::size_t kp) {
  return k * (2 * K - k - 1) / 2 + (kp - k - 1);
}

/// Inverse of pair_index.
inline std::pair<std::size_t, std::size_t> pair_from_index(std::size_t K, std::size_t index) {
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const std::size_t row = K - k - 1;
    if (index < row) return {k, k + 1 + index};
    index -= row;
  }
  throw std::out_of_range("pair index out of range");
}

/// Direction table over cluster pairs. v(k, kp) = +1 proposes moves from k to
/// kp, -1 from kp to k.
class VelocityState {
 public:
  VelocityState() = default;
  explicit VelocityState(std::size_t K) : K_(K), v_(num_pairs(K), 1) {}

  template <class Gen>
  static VelocityState uniform(std::size_t K, Gen& gen) {
    VelocityState out(K);
    for (auto& e : out.v_) e = bernoulli(gen, 0.5) ? 1 : -1;
    return out;
  }

  /// Table whose i-th entry is +1 when bit i of `bits` is 0 and -1 otherwise.
  static VelocityState from_bits(std::size_t K, std::uint64_t bits) {
    VelocityState out(K);
    for (std::size_t p = 0; p < out.v_.size(); ++p) out.v_[p] = ((bits >> p) & 1U) ? -1 : 1;
    return out;
  }

  std::uint64_t to_bits() const {
    std::uint64_t bits = 0;
    for (std::size_t p = 0; p < v_.size(); ++p) {
      if (v_[p] < 0) bits |= std::uint64_t{1} << p;
    }
    return bits;
  }

  std::size_t num_components() const { return K_; }
  std::size_t size() const { return v_.size(); }

  /// Entry v_{k,kp} for k < kp.
  int get(std::size_t k, std::size_t kp) const {
    assert(k < kp && kp < K_);
    return v_[pair_index(K_, k, kp)];
  }

  void flip(std::size_t k, std::size_t kp) {
    assert(k < kp && kp < K_);
    auto& e = v_[pair_index(K_, k, kp)];
    e = static_cast<std::int8_t>(-e);
  }

  /// Antisymmetric extension: V(a, b) = +1 means mass flows from a to b.
  /// V(a, a) = 0 and V(b, a) = -V(a, b).
  int flow(std::size_t a, std::size_t b) const {
    if (a == b) return 0;
    return a < b ? get(a, b) : -get(b, a);
  }

  /// (source, target) of the pair under the current direction.
  std::pair<std::size_t, std::size_t> direction(std::size_t k, std::size_t kp) const {
    return get(k, kp) > 0 ? std::pair{k, kp} : std::pair{kp, k};
  }

  friend bool operator==(const VelocityState&, const VelocityState&) = default;

 private:
  std::size_t K_ = 0;
  std::vector<std::int8_t> v_;
};

}  // namespace liftmix
