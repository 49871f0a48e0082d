#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "liftmix/exact_oracle.hpp"
#include "liftmix/samplers.hpp"
#include "liftmix/simulate.hpp"

using namespace liftmix;

namespace {

// 4-sigma binomial band.
void expect_frequency(double count, double trials, double p, const char* what) {
  const double sd = std::sqrt(std::max(p * (1 - p), 1e-12) / trials);
  EXPECT_NEAR(count / trials, p, 4 * sd + 1e-12) << what;
}

}  // namespace

TEST(SamplePair, TwoComponentsAlwaysSamePair) {
  Rng gen(1);
  const auto model = ModelSpec::prior_only({1.0, 1.0});
  const auto data = Dataset::prior_only(5);
  AllocationState s(model, data, {0, 1, 1, 0, 1});
  const std::pair<std::size_t, std::size_t> only{0, 1};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_pair(s, gen), only);
}

TEST(SamplePair, AllInOneCluster) {
  Rng gen(2);
  const auto model = ModelSpec::prior_only({1.0, 1.0, 1.0});
  const auto data = Dataset::prior_only(6);
  AllocationState s(model, data, std::vector<std::size_t>(6, 0));
  std::map<std::pair<std::size_t, std::size_t>, int> hits;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++hits[sample_pair(s, gen)];
  expect_frequency(hits[{0, 1}], draws, 0.5, "(1,2)");
  expect_frequency(hits[{0, 2}], draws, 0.5, "(1,3)");
  EXPECT_EQ(hits[std::make_pair(std::size_t{1}, std::size_t{2})], 0);
}

TEST(SamplePair, FrequenciesMatchPairLaw) {
  Rng gen(3);
  const auto model = ModelSpec::prior_only({1.0, 1.0, 1.0});
  const auto data = Dataset::prior_only(4);
  AllocationState s(model, data, {0, 0, 1, 2});
  std::map<std::pair<std::size_t, std::size_t>, int> hits;
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) ++hits[sample_pair(s, gen)];
  expect_frequency(hits[{0, 1}], draws, 3.0 / 8.0, "(1,2)");
  expect_frequency(hits[{0, 2}], draws, 3.0 / 8.0, "(1,3)");
  expect_frequency(hits[{1, 2}], draws, 2.0 / 8.0, "(2,3)");
}

TEST(StepMg, SinglePointConditionalIsUniform) {
  Rng gen(4);
  const auto model = ModelSpec::prior_only({1.0, 1.0});
  const auto data = Dataset::prior_only(1);
  AllocationState s(model, data, {0});
  int ones = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto out = step_mg(s, model, gen);
    EXPECT_EQ(out.cost, 2u);
    ones += s.label(0) == 1;
  }
  expect_frequency(ones, draws, 0.5, "n=1");
}

TEST(StepMg, TwoPointsConditional) {
  // c = (1, 1); resampling c_2 gives label 2 with probability (1+0)/3.
  Rng gen(5);
  const auto model = ModelSpec::prior_only({1.0, 1.0});
  const auto data = Dataset::prior_only(2);
  int moved = 0;
  int picked_second = 0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    AllocationState s(model, data, {0, 0});
    const auto out = step_mg(s, model, gen);
    if (*out.point == 1) {
      ++picked_second;
      moved += s.label(1) == 1;
    }
  }
  expect_frequency(moved, picked_second, 1.0 / 3.0, "c2 <- 2");
}

namespace {

// Empirical distribution of one transition from `start`, compared with the
// oracle row.
template <class Step>
void compare_row(const exact::EnumeratedKernel& kernel, std::size_t start_state, Step step, int trials,
                 std::uint64_t seed) {
  Rng gen(seed);
  std::map<std::size_t, int> hits;
  for (int t = 0; t < trials; ++t) ++hits[step(gen)];
  std::map<std::size_t, double> row;
  for (exact::SparseKernel::InnerIterator it(kernel.matrix, static_cast<Eigen::Index>(start_state)); it; ++it) {
    row[static_cast<std::size_t>(it.col())] += it.value();
  }
  for (const auto& [col, count] : hits) {
    EXPECT_GT(row[col], 0.0) << "transition to " << col << " has zero oracle probability";
  }
  for (const auto& [col, p] : row) expect_frequency(hits[col], trials, p, "row entry");
}

}  // namespace

TEST(StepMg, EmpiricalRowMatchesOracle) {
  const auto model = ModelSpec::gaussian({0.5, 1.0, 2.0}, {0.0}, 1.0, 1.0);
  const auto data = Dataset::from_values(1, {-1.0, 0.2, 1.5, 2.0});
  const auto kernel = exact::build_kernel(exact::KernelKind::MG, model, data);
  const std::vector<std::size_t> start{0, 2, 1, 1};
  const std::size_t idx = kernel.space.encode(start);
  compare_row(
      kernel, idx,
      [&](Rng& gen) {
        AllocationState s(model, data, start);
        step_mg(s, model, gen);
        return kernel.space.encode(std::vector<std::size_t>(s.labels().begin(), s.labels().end()));
      },
      1000000, 6);
}

TEST(StepR, EmpiricalRowMatchesOracle) {
  const auto model = ModelSpec::gaussian({0.5, 1.0, 2.0}, {0.0}, 1.0, 1.0);
  const auto data = Dataset::from_values(1, {-1.0, 0.2, 1.5, 2.0});
  const auto kernel = exact::build_kernel(exact::KernelKind::R, model, data);
  const std::vector<std::size_t> start{0, 2, 2, 1};
  compare_row(
      kernel, kernel.space.encode(start),
      [&](Rng& gen) {
        AllocationState s(model, data, start);
        step_r(s, model, gen);
        return kernel.space.encode(std::vector<std::size_t>(s.labels().begin(), s.labels().end()));
      },
      1000000, 7);
}

TEST(StepNr, EmpiricalRowMatchesOracle) {
  const auto model = ModelSpec::gaussian({0.5, 1.0, 2.0}, {0.0}, 1.0, 1.0);
  const auto data = Dataset::from_values(1, {-1.0, 0.2, 1.5});
  const double xi = 0.5;
  const auto kernel = exact::build_kernel(exact::KernelKind::NR, model, data, xi);
  const std::vector<std::size_t> start{0, 2, 2};
  const std::uint64_t bits = 0b101;
  const auto& space = kernel.space;
  compare_row(
      kernel, space.state_index(space.encode(start), bits),
      [&](Rng& gen) {
        AllocationState s(model, data, start);
        auto v = VelocityState::from_bits(3, bits);
        step_nr(s, v, model, xi, gen);
        return space.state_index(space.encode(std::vector<std::size_t>(s.labels().begin(), s.labels().end())),
                                 v.to_bits());
      },
      1000000, 8);
}

TEST(StepQnr, EmpiricalRowMatchesOracle) {
  const auto model = ModelSpec::prior_only({0.5, 2.0, 1.0});
  const auto data = Dataset::prior_only(3);
  const double xi = 0.5;
  const double s_param = 0.5;
  const auto kernel = exact::build_kernel(exact::KernelKind::QNR, model, data, xi, s_param);
  const std::vector<std::size_t> start{0, 1, 1};
  const std::uint64_t bits = 0b010;
  const auto& space = kernel.space;
  compare_row(
      kernel, space.state_index(space.encode(start), bits),
      [&](Rng& gen) {
        AllocationState s(model, data, start);
        auto v = VelocityState::from_bits(3, bits);
        step_qnr(s, v, model, s_param, xi, gen);
        return space.state_index(space.encode(std::vector<std::size_t>(s.labels().begin(), s.labels().end())),
                                 v.to_bits());
      },
      1000000, 9);
}

TEST(StepR, UnitAlphaPriorAlwaysAccepts) {
  Rng gen(10);
  const auto model = ModelSpec::prior_only({1.0, 1.0, 1.0});
  const auto data = Dataset::prior_only(30);
  auto chain = init_state(InitMode::UniformRandom, model, data, gen);
  for (int t = 0; t < 20000; ++t) {
    const auto out = step_r(chain.allocation, model, gen);
    EXPECT_NE(out.kind, MoveKind::PairReject);
    EXPECT_EQ(out.cost, kPairMoveCost);
  }
}

TEST(StepLiftedPair, EmptySourceFlipsVelocity) {
  Rng gen(11);
  const auto model = ModelSpec::prior_only({1.0, 1.0});
  const auto data = Dataset::prior_only(3);
  AllocationState s(model, data, {1, 1, 1});
  VelocityState v(2);  // +1: proposes 0 -> 1, and cluster 0 is empty.
  const auto out = step_lifted_pair(s, v, model, 0, 1, 0.0, gen);
  EXPECT_EQ(out.kind, MoveKind::EmptyClusterFlip);
  EXPECT_EQ(v.get(0, 1), -1);
  EXPECT_EQ(s.count(1), 3u);
}

TEST(StepLiftedPair, DoubleRefreshRestoresVelocity) {
  // xi = n makes both refresh flips certain; unit alpha accepts every move.
  Rng gen(12);
  const auto model = ModelSpec::prior_only({1.0, 1.0});
  const auto data = Dataset::prior_only(4);
  AllocationState s(model, data, {0, 0, 1, 1});
  VelocityState v(2);
  const auto out = step_lifted_pair(s, v, model, 0, 1, 4.0, gen);
  EXPECT_EQ(out.kind, MoveKind::PairAccept);
  EXPECT_EQ(out.refresh_flips, 2u);
  EXPECT_EQ(v.get(0, 1), 1);
  // Pre-flip reversed the direction, so the move went 1 -> 0.
  EXPECT_EQ(s.count(0), 3u);
}

TEST(StepNr, UnitAlphaNoRefreshIsDeterministicSweep) {
  Rng gen(13);
  const auto model = ModelSpec::prior_only({1.0, 1.0});
  const std::size_t n = 10;
  const auto data = Dataset::prior_only(n);
  AllocationState s(model, data, std::vector<std::size_t>(n, 0));
  VelocityState v(2);
  for (std::size_t t = 1; t <= n; ++t) {
    const auto out = step_nr(s, v, model, 0.0, gen);
    EXPECT_EQ(out.kind, MoveKind::PairAccept);
    EXPECT_EQ(s.count(0), n - t);
    EXPECT_EQ(out.cost, 2u);
  }
  const auto out = step_nr(s, v, model, 0.0, gen);
  EXPECT_EQ(out.kind, MoveKind::EmptyClusterFlip);
  EXPECT_EQ(v.get(0, 1), -1);
}

TEST(StepQnr, RunLengthGeometricMean) {
  Rng gen(14);
  EXPECT_EQ(sample_run_length(1, 1.0, gen), 1u);
  EXPECT_EQ(sample_run_length(0, 0.3, gen), 1u);
  const std::size_t m = 7;
  const int draws = 100000;
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) sum += static_cast<double>(sample_run_length(m, 1.0, gen));
  const double q = 1.0 / m;
  EXPECT_NEAR(sum / draws, 7.0, 4 * std::sqrt((1 - q) / (q * q) / draws));
}

TEST(StepQnr, CostIsTwoPerSubstep) {
  Rng gen(15);
  const auto model = ModelSpec::prior_only({1.0, 0.5, 0.5});
  const auto data = Dataset::prior_only(20);
  auto chain = init_state(InitMode::UniformRandom, model, data, gen);
  for (int t = 0; t < 1000; ++t) {
    const auto out = step_qnr(chain.allocation, chain.velocity, model, 1.0, 0.5, gen);
    EXPECT_EQ(out.cost, 2 * out.substeps);
    EXPECT_GE(out.substeps, 1u);
  }
}

TEST(StepCd, EmptyClusterAtomFromPrior) {
  Rng gen(16);
  const auto model = ModelSpec::gaussian({1.0, 1.0}, {3.0}, 1.0, 0.25);
  const auto data = Dataset::from_values(1, {0.0, 0.1});
  AllocationState s(model, data, {0, 0});
  ConditionalParams p;
  const int draws = 50000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    resample_params(p, s, model, gen);
    sum += p.atoms[1];
    sq += p.atoms[1] * p.atoms[1];
  }
  const double mean = sum / draws;
  EXPECT_NEAR(mean, 3.0, 4 * std::sqrt(0.25 / draws));
  EXPECT_NEAR(sq / draws - mean * mean, 0.25, 0.01);
}

TEST(StepCd, WeightsFollowPosteriorDirichlet) {
  Rng gen(17);
  const auto model = ModelSpec::prior_only({1.0, 1.0});
  const auto data = Dataset::prior_only(3);
  AllocationState s(model, data, {0, 0, 1});
  ConditionalParams p;
  const int draws = 100000;
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) {
    resample_params(p, s, model, gen);
    sum += p.weights[0];
  }
  // Dir(3, 2): mean 3/5, variance 3*2/(25*6) = 0.04.
  EXPECT_NEAR(sum / draws, 0.6, 4 * std::sqrt(0.04 / draws));
}

TEST(StepCd, PriorOnlyAllocationIsCategoricalOfWeights) {
  Rng gen(18);
  const auto model = ModelSpec::prior_only({1.0, 1.0});
  const auto data = Dataset::prior_only(1);
  AllocationState s(model, data, {0});
  ConditionalParams p{{0.2, 0.8}, {}};
  int ones = 0;
  int updates = 0;
  for (int i = 0; i < 200000; ++i) {
    const auto before = p.weights;
    const auto out = step_cd(s, p, model, gen);
    if (out.kind == MoveKind::CdAllocation) {
      EXPECT_EQ(out.cost, 2u);
      ++updates;
      ones += s.label(0) == 1;
    } else {
      p.weights = before;  // keep w fixed at (0.2, 0.8)
    }
  }
  expect_frequency(ones, updates, 0.8, "Cat(w)");
}

TEST(InitState, AllInOneAndGiven) {
  Rng gen(19);
  const auto model = ModelSpec::prior_only({1.0, 1.0, 1.0});
  const auto data = Dataset::prior_only(5);
  const auto all = init_state(InitMode::AllInOne, model, data, gen);
  EXPECT_EQ(all.allocation.counts(), (std::vector<std::size_t>{5, 0, 0}));
  const std::vector<std::size_t> given{2, 2, 1, 0, 2};
  const auto g = init_state(InitMode::Given, model, data, gen, given);
  EXPECT_EQ(g.allocation.counts(), (std::vector<std::size_t>{1, 1, 3}));
  const std::vector<std::size_t> bad{0, 3, 0, 0, 0};
  EXPECT_THROW(init_state(InitMode::Given, model, data, gen, bad), std::invalid_argument);
}

TEST(InitState, UniformCountsAndVelocities) {
  Rng gen(20);
  const auto model = ModelSpec::prior_only({1.0, 1.0, 1.0, 1.0});
  const std::size_t n = 100000;
  const auto data = Dataset::prior_only(n);
  const auto chain = init_state(InitMode::UniformRandom, model, data, gen);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(static_cast<double>(chain.allocation.count(k)), n / 4.0, 4 * std::sqrt(n * 0.25 * 0.75));
  }
  int plus = 0;
  const int seeds = 4000;
  for (int i = 0; i < seeds; ++i) {
    const auto v = VelocityState::uniform(4, gen);
    for (std::size_t k = 0; k < 4; ++k) {
      for (std::size_t kp = k + 1; kp < 4; ++kp) plus += v.get(k, kp) > 0;
    }
  }
  expect_frequency(plus, seeds * 6.0, 0.5, "velocity sign");
}

TEST(VelocityState, AntisymmetricExtension) {
  Rng gen(21);
  const auto v = VelocityState::uniform(5, gen);
  for (std::size_t a = 0; a < 5; ++a) {
    EXPECT_EQ(v.flow(a, a), 0);
    for (std::size_t b = 0; b < 5; ++b) {
      if (a != b) {
        EXPECT_EQ(v.flow(a, b), -v.flow(b, a));
      }
    }
  }
  for (std::size_t p = 0; p < num_pairs(5); ++p) {
    const auto [k, kp] = pair_from_index(5, p);
    EXPECT_EQ(pair_index(5, k, kp), p);
  }
  EXPECT_EQ(VelocityState::from_bits(5, v.to_bits()), v);
}
