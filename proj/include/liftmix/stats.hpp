#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace liftmix {

enum class DistanceKind { KS, W1 };

inline std::string_view to_string(DistanceKind kind) { return kind == DistanceKind::KS ? "ks" : "w1"; }

inline DistanceKind parse_distance_kind(std::string_view s) {
  if (s == "ks") return DistanceKind::KS;
  if (s == "w1") return DistanceKind::W1;
  throw std::invalid_argument("unknown distance: " + std::string(s));
}

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
inline double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance needs non-empty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Wasserstein-1 distance between empirical laws: integral of |F_a - F_b|.
inline double w1_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("w1_distance needs non-empty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double prev = std::min(x.front(), y.front());
  double total = 0.0;
  while (i < x.size() || j < y.size()) {
    double v;
    if (j >= y.size() || (i < x.size() && x[i] <= y[j])) {
      v = x[i];
    } else {
      v = y[j];
    }
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (v - prev);
    prev = v;
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
  }
  return total;
}

inline double distribution_distance(std::span<const double> a, std::span<const double> b, DistanceKind kind) {
  return kind == DistanceKind::KS ? ks_distance(a, b) : w1_distance(a, b);
}

inline double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

inline double median(std::vector<double> x) {
  if (x.empty()) throw std::invalid_argument("median of empty sample");
  const std::size_t mid = x.size() / 2;
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid), x.end());
  const double upper = x[mid];
  if (x.size() % 2 == 1) return upper;
  const double lower = *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

struct BatchMeansEstimate {
  double variance = 0.0;
  /// Standard error of `variance`, sqrt(2 / (batches - 1)) * variance.
  double std_error = 0.0;
  std::size_t batch_size = 0;
  std::size_t batches = 0;
};

/// Batch-means asymptotic variance of the whole trace: the trace is cut into
/// `batches` equal batches (a remainder at the front is dropped) and the
/// estimate is batch_size * sample variance of the batch means.
inline BatchMeansEstimate batch_means(std::span<const double> trace, std::size_t batches) {
  if (batches < 2) throw std::invalid_argument("batch means needs at least 2 batches");
  const std::size_t size = trace.size() / batches;
  if (size < 1) throw std::invalid_argument("trace shorter than the batch count");
  const std::size_t offset = trace.size() - size * batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t t = 0; t < size; ++t) s += trace[offset + b * size + t];
    means[b] = s / static_cast<double>(size);
  }
  BatchMeansEstimate out;
  out.batch_size = size;
  out.batches = batches;
  out.variance = static_cast<double>(size) * sample_variance(means);
  out.std_error = out.variance * std::sqrt(2.0 / static_cast<double>(batches - 1));
  return out;
}

/// Batch means on the stationary phase: the first half of the trace is
/// discarded as burn-in.
inline double batch_means_asymptotic_variance(std::span<const double> trace, std::size_t batches) {
  return batch_means(trace.subspan(trace.size() / 2), batches).variance;
}

}  // namespace liftmix
