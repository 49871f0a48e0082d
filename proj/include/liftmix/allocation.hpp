#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "liftmix/model.hpp"

namespace liftmix {

/// Sufficient statistics of one cluster: the count, the coordinate-wise sum of
/// members (GaussianIso) and the integer sum of members (PoissonGamma).
struct ClusterStats {
  std::size_t count = 0;
  std::vector<double> sum;
  std::int64_t count_sum = 0;
};

/// Allocation vector with cached counts, member lists and cluster statistics.
///
/// Member lists use swap-remove with a reverse position index, so removing a
/// point and drawing a uniform member of a cluster are both O(1). The dataset
/// is borrowed and must outlive the state.
class AllocationState {
 public:
  /// Moves between full recomputations of floating-point sums.
  static constexpr std::uint64_t kRecomputeEvery = 1'000'000;

  AllocationState() = default;

  AllocationState(const ModelSpec& model, const Dataset& data, std::vector<std::size_t> labels)
      : data_(&data), kind_(model.kind), labels_(std::move(labels)) {
    const std::size_t K = model.num_components();
    if (labels_.size() != data.size()) throw std::invalid_argument("allocation length must equal n");
    for (std::size_t l : labels_) {
      if (l >= K) throw std::invalid_argument("allocation label out of range [K]");
    }
    data.check_compatible(model);
    members_.assign(K, {});
    stats_.assign(K, ClusterStats{});
    position_.assign(labels_.size(), 0);
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      auto& list = members_[labels_[i]];
      position_[i] = list.size();
      list.push_back(i);
    }
    recompute_stats();
  }

  std::size_t size() const { return labels_.size(); }
  std::size_t num_components() const { return members_.size(); }
  std::size_t label(std::size_t i) const { return labels_[i]; }
  std::span<const std::size_t> labels() const { return labels_; }
  std::size_t count(std::size_t k) const { return stats_[k].count; }
  std::span<const std::size_t> members(std::size_t k) const { return members_[k]; }
  const ClusterStats& stats(std::size_t k) const { return stats_[k]; }
  const Dataset& data() const { return *data_; }

  std::vector<std::size_t> counts() const {
    std::vector<std::size_t> out(members_.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = stats_[k].count;
    return out;
  }

  /// Reassign point i to cluster k_to. Moving a point to its own cluster is a
  /// no-op.
  void move_point(std::size_t i, std::size_t k_to) {
    assert(i < labels_.size() && k_to < members_.size());
    const std::size_t k_from = labels_[i];
    if (k_from == k_to) return;

    auto& from = members_[k_from];
    const std::size_t pos = position_[i];
    const std::size_t last = from.back();
    from[pos] = last;
    position_[last] = pos;
    from.pop_back();

    auto& to = members_[k_to];
    position_[i] = to.size();
    to.push_back(i);
    labels_[i] = k_to;

    --stats_[k_from].count;
    ++stats_[k_to].count;
    switch (kind_) {
      case ModelKind::PriorOnly:
        break;
      case ModelKind::GaussianIso: {
        const auto y = data_->row(i);
        auto& s_from = stats_[k_from].sum;
        auto& s_to = stats_[k_to].sum;
        for (std::size_t d = 0; d < y.size(); ++d) {
          s_from[d] -= y[d];
          s_to[d] += y[d];
        }
        if (++moves_since_recompute_ >= kRecomputeEvery) recompute_stats();
        break;
      }
      case ModelKind::PoissonGamma: {
        const auto y = static_cast<std::int64_t>(data_->row(i)[0]);
        stats_[k_from].count_sum -= y;
        stats_[k_to].count_sum += y;
        break;
      }
    }
  }

  /// Rebuild every cluster's statistics from the allocation vector.
  void recompute_stats() {
    const std::size_t dim = kind_ == ModelKind::GaussianIso ? data_->dim() : 0;
    for (std::size_t k = 0; k < stats_.size(); ++k) {
      auto& s = stats_[k];
      s.count = members_[k].size();
      s.sum.assign(dim, 0.0);
      s.count_sum = 0;
      for (std::size_t i : members_[k]) {
        if (kind_ == ModelKind::GaussianIso) {
          const auto y = data_->row(i);
          for (std::size_t d = 0; d < dim; ++d) s.sum[d] += y[d];
        } else if (kind_ == ModelKind::PoissonGamma) {
          s.count_sum += static_cast<std::int64_t>(data_->row(i)[0]);
        }
      }
    }
    moves_since_recompute_ = 0;
  }

  /// Largest absolute difference between cached and from-scratch statistics;
  /// +inf when counts or member lists are inconsistent.
  double consistency_error() const {
    std::vector<std::size_t> seen(labels_.size(), 0);
    for (std::size_t k = 0; k < members_.size(); ++k) {
      if (members_[k].size() != stats_[k].count) return std::numeric_limits<double>::infinity();
      for (std::size_t pos = 0; pos < members_[k].size(); ++pos) {
        const std::size_t i = members_[k][pos];
        if (labels_[i] != k || position_[i] != pos) return std::numeric_limits<double>::infinity();
        ++seen[i];
      }
    }
    for (std::size_t c : seen) {
      if (c != 1) return std::numeric_limits<double>::infinity();
    }
    AllocationState fresh = *this;
    fresh.recompute_stats();
    double err = 0.0;
    for (std::size_t k = 0; k < stats_.size(); ++k) {
      for (std::size_t d = 0; d < stats_[k].sum.size(); ++d) {
        err = std::max(err, std::abs(stats_[k].sum[d] - fresh.stats_[k].sum[d]));
      }
      if (stats_[k].count_sum != fresh.stats_[k].count_sum) return std::numeric_limits<double>::infinity();
    }
    return err;
  }

 private:
  const Dataset* data_ = nullptr;
  ModelKind kind_ = ModelKind::PriorOnly;
  std::vector<std::size_t> labels_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::size_t> position_;
  std::vector<ClusterStats> stats_;
  std::uint64_t moves_since_recompute_ = 0;
};

}  // namespace liftmix
