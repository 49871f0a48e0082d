#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "liftmix/exact_oracle.hpp"
#include "liftmix/predictive.hpp"

using namespace liftmix;
using namespace liftmix::exact;

namespace {

Dataset gaussian_data(std::size_t n, std::uint64_t seed) {
  Rng gen(seed);
  std::normal_distribution<double> normal(0.0, 1.5);
  std::vector<double> v(n);
  for (auto& y : v) y = normal(gen);
  return Dataset::from_values(1, v);
}

EnumeratedKernel two_state(double a, double b) {
  EnumeratedKernel k;
  k.kind = KernelKind::MG;
  k.space = StateSpace(1, 2, false);
  k.target = {b / (a + b), a / (a + b)};
  std::vector<Eigen::Triplet<double>> t{{0, 0, 1 - a}, {0, 1, a}, {1, 0, b}, {1, 1, 1 - b}};
  k.matrix.resize(2, 2);
  k.matrix.setFromTriplets(t.begin(), t.end());
  return k;
}

}  // namespace

TEST(StateSpace, GuardAndEncoding) {
  EXPECT_THROW(StateSpace(13, 3, false), std::invalid_argument);
  EXPECT_THROW(StateSpace(11, 3, true), std::invalid_argument);
  const StateSpace space(4, 3, true);
  EXPECT_EQ(space.size(), 81u * 8u);
  for (std::size_t a = 0; a < space.num_allocations(); ++a) EXPECT_EQ(space.encode(space.decode(a)), a);
  const auto c = space.decode(space.moved(space.encode({0, 1, 2, 2}), 3, 2, 0));
  EXPECT_EQ(c, (std::vector<std::size_t>{0, 1, 2, 0}));
}

TEST(EnumerateTarget, PriorOnlyTwoPoints) {
  const auto pi = enumerate_target(ModelSpec::prior_only({1.0, 1.0}), Dataset::prior_only(2));
  ASSERT_EQ(pi.size(), 4u);
  const StateSpace space(2, 2, false);
  EXPECT_NEAR(pi[space.encode({0, 0})], 2.0 / 6.0, 1e-14);
  EXPECT_NEAR(pi[space.encode({0, 1})], 1.0 / 6.0, 1e-14);
  EXPECT_NEAR(pi[space.encode({1, 0})], 1.0 / 6.0, 1e-14);
  EXPECT_NEAR(pi[space.encode({1, 1})], 2.0 / 6.0, 1e-14);
}

TEST(EnumerateTarget, SymmetricUnderGlobalLabelSwap) {
  const auto model = ModelSpec::gaussian({0.7, 0.7, 0.7}, {0.0}, 1.0, 2.0);
  const auto data = gaussian_data(5, 1);
  const auto pi = enumerate_target(model, data);
  const StateSpace space(5, 3, false);
  double sum = 0.0;
  for (std::size_t a = 0; a < pi.size(); ++a) {
    sum += pi[a];
    auto c = space.decode(a);
    for (auto& l : c) l = (l + 1) % 3;
    EXPECT_NEAR(pi[space.encode(c)], pi[a], 1e-13);
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(EnumerateTarget, ConditionalMatchesPredictiveWeights) {
  const auto model = ModelSpec::gaussian({0.5, 1.0, 2.0}, {0.3}, 0.8, 1.7);
  const auto data = gaussian_data(4, 2);
  const auto pi = enumerate_target(model, data);
  const StateSpace space(4, 3, false);
  for (std::size_t a = 0; a < space.num_allocations(); a += 7) {
    const auto c = space.decode(a);
    AllocationState s(model, data, c);
    for (std::size_t i = 0; i < 4; ++i) {
      const auto lw = log_cond_weights(model, s, i);
      const double top = *std::max_element(lw.begin(), lw.end());
      double z = 0.0;
      for (double v : lw) z += std::exp(v - top);
      double joint = 0.0;
      for (std::size_t k = 0; k < 3; ++k) joint += pi[space.moved(a, i, c[i], k)];
      for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(std::exp(lw[k] - top) / z, pi[space.moved(a, i, c[i], k)] / joint, 1e-10);
      }
    }
  }
}

TEST(BuildKernel, MgRowIsAverageOfConditionals) {
  const auto model = ModelSpec::prior_only({0.5, 2.0});
  const std::size_t n = 4;
  const auto kernel = build_kernel(KernelKind::MG, model, Dataset::prior_only(n));
  const Eigen::MatrixXd P = kernel.dense();
  const StateSpace& space = kernel.space;
  for (std::size_t a = 0; a < space.num_allocations(); ++a) {
    const auto c = space.decode(a);
    std::vector<double> expect(space.num_allocations(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double n1 = static_cast<double>(std::count(c.begin(), c.end(), std::size_t{0})) - (c[i] == 0);
      const double p1 = (0.5 + n1) / (2.5 + n - 1.0);
      expect[space.moved(a, i, c[i], 0)] += p1 / n;
      expect[space.moved(a, i, c[i], 1)] += (1 - p1) / n;
    }
    for (std::size_t b = 0; b < space.num_allocations(); ++b) {
      EXPECT_NEAR(P(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), expect[b], 1e-14);
    }
  }
}

TEST(BuildKernel, AllKernelsStochasticAndInvariant) {
  const auto model = ModelSpec::gaussian({0.5, 1.0, 2.0}, {0.0}, 1.0, 1.0);
  const auto data = gaussian_data(4, 3);
  for (auto kind : {KernelKind::MG, KernelKind::R, KernelKind::NR, KernelKind::QNR}) {
    const auto kernel = build_kernel(kind, model, data, 0.5, 0.5);
    EXPECT_LE(kernel.max_row_sum_error(), 1e-12) << to_string(kind);
    EXPECT_GE(kernel.min_entry(), 0.0) << to_string(kind);
    EXPECT_LE(check_invariance(kernel), 1e-10) << to_string(kind);
  }
}

TEST(BuildKernel, ReversibilityPattern) {
  const auto model = ModelSpec::gaussian({0.5, 1.0, 2.0}, {0.0}, 1.0, 1.0);
  const auto data = gaussian_data(4, 4);
  EXPECT_LE(detailed_balance_violation(build_kernel(KernelKind::MG, model, data)), 1e-12);
  EXPECT_LE(detailed_balance_violation(build_kernel(KernelKind::R, model, data)), 1e-12);
  EXPECT_GT(detailed_balance_violation(build_kernel(KernelKind::NR, model, data, 0.5)), 1e-6);
}

TEST(BuildKernel, QnrClosedFormMatchesTruncatedSeries) {
  const auto model = ModelSpec::prior_only({0.5, 1.0, 2.0});
  const auto data = Dataset::prior_only(3);
  for (double s : {0.5, 1.0, 3.0}) {
    const auto a = build_kernel(KernelKind::QNR, model, data, 0.5, s, GeometricSum::Truncated);
    const auto b = build_kernel(KernelKind::QNR, model, data, 0.5, s, GeometricSum::ClosedForm);
    EXPECT_LE((a.dense() - b.dense()).cwiseAbs().maxCoeff(), 1e-12) << "s=" << s;
  }
}

TEST(BuildKernel, SingletonMoveEntries) {
  const std::size_t n = 8;
  const auto model = ModelSpec::prior_only({1.0, 1.0, 1.0});
  const auto data = Dataset::prior_only(n);
  const auto mg = build_kernel(KernelKind::MG, model, data);
  const auto r = build_kernel(KernelKind::R, model, data);
  const auto [c, cp] = singleton_move_pair(mg.space);
  const double p_mg = mg.matrix.coeff(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(cp));
  const double p_r = r.matrix.coeff(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(cp));
  EXPECT_NEAR(p_mg, 2.0 / (n * (n + 2.0)), 1e-12);
  // Pair (2,3) has probability 1/n, direction 1/2, one member, and the
  // Metropolis ratio is 2 * (1/2) = 1.
  EXPECT_NEAR(p_r, 1.0 / (2.0 * n), 1e-12);
  EXPECT_NEAR(p_mg / p_r, 4.0 / (n + 2.0), 1e-12);
}

TEST(BuildKernel, MinorizationHolds) {
  const auto data = gaussian_data(4, 5);
  for (const auto& alpha : {std::vector<double>{1.0, 1.0, 1.0}, std::vector<double>{0.5, 0.5, 0.5},
                            std::vector<double>{2.0, 1.0, 1.0}}) {
    const auto model = ModelSpec::gaussian(alpha, {0.0}, 1.0, 1.0);
    const auto mg = build_kernel(KernelKind::MG, model, data);
    const auto r = build_kernel(KernelKind::R, model, data);
    EXPECT_LE(minorization_violation(mg, r), 1e-14);
  }
}

TEST(AsymptoticVariance, TwoStateClosedForm) {
  const auto k = two_state(0.25, 0.25);
  Eigen::VectorXd g(2);
  g << 0.0, 1.0;
  EXPECT_NEAR(stationary_variance(k, g), 0.25, 1e-14);
  EXPECT_NEAR(asymptotic_variance_dense(k, g), 0.75, 1e-12);
  EXPECT_NEAR(asymptotic_variance_exact(k, g), 0.75, 1e-12);
  const auto asym = two_state(0.1, 0.3);
  // pi = (3/4, 1/4); Var = pi0 pi1 (2/(a+b) - 1).
  EXPECT_NEAR(asymptotic_variance_exact(asym, g), 0.1875 * (2.0 / 0.4 - 1.0), 1e-12);
}

TEST(AsymptoticVariance, IndependentKernelGivesStationaryVariance) {
  const auto pi = enumerate_target(ModelSpec::prior_only({0.5, 2.0, 1.0}), Dataset::prior_only(3));
  EnumeratedKernel k;
  k.space = StateSpace(3, 3, false);
  k.target = pi;
  Eigen::MatrixXd P(27, 27);
  for (int r = 0; r < 27; ++r) {
    for (int c = 0; c < 27; ++c) P(r, c) = pi[c];
  }
  k.matrix = P.sparseView();
  for (const auto& [name, g] : test_functionals(3)) {
    const auto values = evaluate(k.space, g);
    EXPECT_NEAR(asymptotic_variance_exact(k, values), stationary_variance(k, values), 1e-12) << name;
  }
}

TEST(AsymptoticVariance, SparseMatchesDense) {
  const auto model = ModelSpec::gaussian({0.5, 1.0, 2.0}, {0.0}, 1.0, 1.0);
  const auto data = gaussian_data(4, 6);
  for (auto kind : {KernelKind::MG, KernelKind::R, KernelKind::NR, KernelKind::QNR}) {
    const auto kernel = build_kernel(kind, model, data, 0.5, 1.0);
    for (const auto& [name, g] : test_functionals(3)) {
      const auto values = evaluate(kernel.space, g);
      const double dense = asymptotic_variance_dense(kernel, values);
      EXPECT_NEAR(asymptotic_variance_exact(kernel, values), dense, 1e-8 * std::max(1.0, dense))
          << to_string(kind) << " " << name;
    }
  }
}

TEST(AsymptoticVariance, PeriodicChainIsRejected) {
  const auto k = two_state(1.0, 1.0);
  Eigen::VectorXd g(2);
  g << 0.0, 1.0;
  // A period-2 chain has eigenvalue -1; the Poisson equation is still
  // solvable, so only a reducible chain is singular.
  auto reducible = two_state(0.0, 0.0);
  reducible.target = {0.5, 0.5};
  EXPECT_THROW(asymptotic_variance_dense(reducible, g), std::runtime_error);
  EXPECT_NO_THROW(asymptotic_variance_dense(k, g));
}

TEST(AsymptoticVariance, LiftedReversibleGibbsOrdering) {
  for (std::size_t K : {2u, 3u}) {
    const std::size_t n = K == 2 ? 6 : 4;
    const auto model = ModelSpec::gaussian(std::vector<double>(K, 0.5), {0.0}, 1.0, 1.0);
    const auto data = gaussian_data(n, 7 + K);
    const auto mg = build_kernel(KernelKind::MG, model, data);
    const auto r = build_kernel(KernelKind::R, model, data);
    const auto nr = build_kernel(KernelKind::NR, model, data, 0.5);
    for (const auto& [name, g] : test_functionals(K)) {
      const auto gv = evaluate(mg.space, g);
      const double v_mg = asymptotic_variance_exact(mg, gv);
      const double v_r = asymptotic_variance_exact(r, gv);
      const double v_nr = asymptotic_variance_exact(nr, evaluate(nr.space, g));
      const double var_pi = stationary_variance(mg, gv);
      EXPECT_LE(v_nr, v_r + 1e-8) << "K=" << K << " " << name;
      EXPECT_LE(v_r, 2.0 * (K - 1) * v_mg + (2.0 * K - 3.0) * var_pi + 1e-8) << "K=" << K << " " << name;
    }
  }
}

TEST(SecondEigenvalue, MatchesClosedForm) {
  auto closed = [](double n, double a) { return 1.0 - a / (n * (n + a - 1.0)); };
  EXPECT_NEAR(second_eigenvalue_lumped_mg(10, 1, 1), 54.0 / 55.0, 1e-8);
  EXPECT_NEAR(second_eigenvalue_lumped_mg(30, 1, 1), 1.0 - 2.0 / 930.0, 1e-8);
  EXPECT_NEAR(second_eigenvalue_lumped_mg(10, 2, 3), closed(10, 5), 1e-8);
  EXPECT_NEAR(second_eigenvalue_lumped_mg(20, 2, 3), closed(20, 5), 1e-8);
}

TEST(SecondEigenvalue, AgreesWithFullKernelSpectrum) {
  // The lumped chain's second eigenvalue is an eigenvalue of the full kernel.
  const std::size_t n = 5;
  const auto kernel = build_kernel(KernelKind::MG, ModelSpec::prior_only({2.0, 3.0}), Dataset::prior_only(n));
  Eigen::EigenSolver<Eigen::MatrixXd> solver(kernel.dense(), false);
  const double lambda = second_eigenvalue_lumped_mg(n, 2.0, 3.0);
  double best = 1.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    best = std::min(best, std::abs(solver.eigenvalues()(i) - lambda));
  }
  EXPECT_LE(best, 1e-10);
}

TEST(TestFunctionals, Values) {
  const auto fs = test_functionals(3);
  ASSERT_EQ(fs.size(), 3u);
  const std::vector<std::size_t> c{0, 1, 2, 0};
  EXPECT_DOUBLE_EQ(fs[0].second(c), 0.5);
  EXPECT_DOUBLE_EQ(fs[1].second(c), 0.5);
  EXPECT_DOUBLE_EQ(fs[2].second(c), 1.0);
  EXPECT_DOUBLE_EQ(fs[2].second({0, 1, 2, 1}), 0.0);
}
