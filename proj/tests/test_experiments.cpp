#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "liftmix/experiments.hpp"
#include "liftmix/io.hpp"
#include "liftmix/stats.hpp"

using namespace liftmix;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("liftmix_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig small_prior_config(SamplerKind kind) {
  ExperimentConfig cfg;
  cfg.model = ModelSpec::prior_only({0.5, 0.5, 0.5});
  cfg.data.source = DataSource::Prior;
  cfg.data.n = 30;
  cfg.samplers = {{kind, 0.5, 1.0}};
  cfg.replicates = 8;
  cfg.sweeps = 5;
  cfg.seed = 42;
  cfg.threads = 2;
  return cfg;
}

}  // namespace

TEST(Distance, Examples) {
  const std::vector<double> a{0.1, 0.4, 0.4, 0.9};
  EXPECT_EQ(ks_distance(a, a), 0.0);
  EXPECT_EQ(w1_distance(a, a), 0.0);
  const std::vector<double> zero{0.0, 0.0};
  const std::vector<double> one{1.0};
  EXPECT_DOUBLE_EQ(ks_distance(zero, one), 1.0);
  EXPECT_DOUBLE_EQ(w1_distance(zero, one), 1.0);
  // Shift by 0.3 moves every quantile by 0.3.
  std::vector<double> b(a);
  for (auto& v : b) v += 0.3;
  EXPECT_NEAR(w1_distance(a, b), 0.3, 1e-12);
  EXPECT_EQ(parse_distance_kind("w1"), DistanceKind::W1);
  EXPECT_THROW(parse_distance_kind("tv"), std::invalid_argument);
}

TEST(Distance, UniformSamplesAreClose) {
  Rng gen(1);
  std::vector<double> a(10000), b(10000);
  for (auto& v : a) v = uniform01(gen);
  for (auto& v : b) v = uniform01(gen);
  EXPECT_LE(ks_distance(a, b), 0.03);
}

TEST(BatchMeans, IidNormal) {
  Rng gen(2);
  std::normal_distribution<double> normal;
  std::vector<double> trace(1000000);
  for (auto& v : trace) v = normal(gen);
  const auto est = batch_means(trace, 1000);
  EXPECT_EQ(est.batch_size, 1000u);
  EXPECT_NEAR(est.variance, 1.0, 0.15);
}

TEST(BatchMeans, ConstantTraceIsZero) {
  const std::vector<double> trace(5000, 0.7);
  EXPECT_NEAR(batch_means_asymptotic_variance(trace, 50), 0.0, 1e-20);
}

TEST(BatchMeans, AutoregressiveClosedForm) {
  // AR(1), rho = 0.5: marginal variance 1/(1 - rho^2) = 4/3, asymptotic
  // variance (1 + rho)/(1 - rho) * 4/3 = 4.
  Rng gen(3);
  std::normal_distribution<double> normal;
  std::vector<double> trace(2000000);
  double x = 0.0;
  for (auto& v : trace) v = x = 0.5 * x + normal(gen);
  EXPECT_NEAR(batch_means_asymptotic_variance(trace, 1000), 4.0, 0.6);
}

TEST(BatchMeans, StreamingMatchesStored) {
  Rng gen(4);
  std::vector<double> trace(10000);
  for (auto& v : trace) v = uniform01(gen);
  StreamingBatchMeans acc(100);
  for (double v : trace) acc.push(v);
  EXPECT_NEAR(acc.estimate().variance, batch_means(trace, 100).variance, 1e-12);
}

TEST(DirichletMultinomial, Moments) {
  Rng gen(5);
  const auto sym = first_coordinate(dirichlet_multinomial_reference({1.0, 1.0}, 50, 100000, gen));
  EXPECT_NEAR(mean(sym), 0.5, 4 * std::sqrt(1.0 / 12.0 / 100000));
  // Beta(4, 4) mixed with Binomial(n, w): Var(w) + E[w(1-w)]/n = 1/36 + (2/9)/n.
  const std::size_t n = 500;
  const auto lumped = first_coordinate(dirichlet_multinomial_reference({4.0, 4.0}, n, 100000, gen));
  const double var = 1.0 / 36.0 + (2.0 / 9.0) / n;
  EXPECT_NEAR(mean(lumped), 0.5, 4 * std::sqrt(var / 100000));
  EXPECT_NEAR(sample_variance(lumped), var, 3 * var * std::sqrt(2.0 / 100000));
}

TEST(DirichletMultinomial, SinglePointIsVertex) {
  Rng gen(6);
  const std::vector<double> alpha{1.0, 3.0};
  int second = 0;
  const int draws = 40000;
  for (const auto& row : dirichlet_multinomial_reference(alpha, 1, draws, gen)) {
    ASSERT_TRUE((row[0] == 1.0 && row[1] == 0.0) || (row[0] == 0.0 && row[1] == 1.0));
    second += row[1] == 1.0;
  }
  EXPECT_NEAR(second / double(draws), 0.75, 4 * std::sqrt(0.75 * 0.25 / draws));
}

TEST(Functionals, Registry) {
  EXPECT_EQ(parse_functional("largest-share", 3).kind, Functional::Kind::LargestShare);
  const auto f = parse_functional("share-3", 3);
  EXPECT_EQ(f.component, 2u);
  EXPECT_THROW(parse_functional("share-4", 3), std::invalid_argument);
  EXPECT_THROW(parse_functional("share-0", 3), std::invalid_argument);
  EXPECT_THROW(parse_functional("entropy", 3), std::invalid_argument);
}

TEST(RunReplicates, LargestShareWithinPigeonholeBounds) {
  for (auto kind : {SamplerKind::MG, SamplerKind::R, SamplerKind::NR, SamplerKind::QNR}) {
    const auto cfg = small_prior_config(kind);
    const auto result = run_replicates(cfg);
    ASSERT_EQ(result.per_sampler.size(), 1u);
    for (const auto& rec : result.per_sampler[0]) {
      ASSERT_EQ(rec.traces[0].size(), cfg.sweeps + 1);
      for (double v : rec.traces[0]) {
        EXPECT_GE(v, 1.0 / 3.0 - 1e-15);
        EXPECT_LE(v, 1.0);
      }
      const auto p = rec.final_proportions();
      EXPECT_EQ(std::accumulate(rec.final_counts.begin(), rec.final_counts.end(), std::size_t{0}), rec.n);
      EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-15);
    }
  }
}

TEST(RunReplicates, ZeroSweepsRecordsInitialSnapshotOnly) {
  auto cfg = small_prior_config(SamplerKind::NR);
  cfg.sweeps = 0;
  const auto result = run_replicates(cfg);
  for (const auto& rec : result.per_sampler[0]) {
    EXPECT_EQ(rec.traces[0].size(), 1u);
    EXPECT_EQ(rec.cost, 0u);
  }
}

TEST(RunReplicates, CostIdentity) {
  for (auto kind : {SamplerKind::MG, SamplerKind::R, SamplerKind::NR, SamplerKind::QNR}) {
    const auto cfg = small_prior_config(kind);
    const std::uint64_t per = kind == SamplerKind::MG ? 3 : 2;
    const auto result = run_replicates(cfg);
    for (const auto& rec : result.per_sampler[0]) {
      EXPECT_EQ(rec.applications, cfg.sweeps * cfg.data.n);
      EXPECT_EQ(rec.cost, cfg.sweeps * cfg.data.n * per);
    }
  }
}

TEST(RunReplicates, ConditionalSamplerOnGaussianData) {
  ExperimentConfig cfg;
  cfg.model = ModelSpec::gaussian({1.0, 1.0, 1.0}, {0.0}, 1.0, 4.0);
  cfg.data.source = DataSource::Simulate;
  cfg.data.n = 40;
  cfg.samplers = {{SamplerKind::CD, 0.5, 1.0}, {SamplerKind::MG, 0.5, 1.0}};
  cfg.replicates = 3;
  cfg.sweeps = 4;
  const auto result = run_replicates(cfg);
  ASSERT_EQ(result.per_sampler.size(), 2u);
  for (const auto& rec : result.per_sampler[0]) EXPECT_GT(rec.cost, 0u);
}

TEST(RunReplicates, CostViolationIsDetected) {
  StepOutcome out;
  out.kind = MoveKind::MgUpdate;
  out.cost = 2;
  EXPECT_THROW(assert_step_cost(out, SamplerKind::MG, 3), std::logic_error);
  out.cost = 3;
  EXPECT_NO_THROW(assert_step_cost(out, SamplerKind::MG, 3));
  out.kind = MoveKind::PairAccept;
  out.substeps = 4;
  out.cost = 8;
  EXPECT_NO_THROW(assert_step_cost(out, SamplerKind::QNR, 3));
  out.cost = 2;
  EXPECT_THROW(assert_step_cost(out, SamplerKind::QNR, 3), std::logic_error);
}

TEST(RunReplicates, ByteIdenticalCsvAcrossRuns) {
  auto cfg = small_prior_config(SamplerKind::NR);
  cfg.samplers.push_back({SamplerKind::MG, 0.5, 1.0});
  const auto dir = scratch_dir("repro");
  for (int run = 0; run < 2; ++run) {
    const auto result = run_replicates(cfg);
    write_traces_csv((dir / ("traces" + std::to_string(run) + ".csv")).string(), cfg, result);
    write_final_csv((dir / ("final" + std::to_string(run) + ".csv")).string(), cfg, result);
  }
  EXPECT_EQ(slurp(dir / "traces0.csv"), slurp(dir / "traces1.csv"));
  EXPECT_EQ(slurp(dir / "final0.csv"), slurp(dir / "final1.csv"));
  const auto header = slurp(dir / "traces0.csv").substr(0, 40);
  EXPECT_EQ(header.rfind("kernel,replicate,sweep,functional,value", 0), 0u);
  fs::remove_all(dir);
}

TEST(RunReplicates, ThreadCountDoesNotChangeResults) {
  auto cfg = small_prior_config(SamplerKind::QNR);
  cfg.threads = 1;
  const auto a = run_replicates(cfg);
  cfg.threads = 4;
  const auto b = run_replicates(cfg);
  for (std::size_t r = 0; r < cfg.replicates; ++r) {
    EXPECT_EQ(a.per_sampler[0][r].traces, b.per_sampler[0][r].traces);
  }
}

TEST(Config, ValidateRejectsInconsistentSources) {
  auto cfg = small_prior_config(SamplerKind::MG);
  cfg.replicates = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_prior_config(SamplerKind::MG);
  cfg.data.source = DataSource::Simulate;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_prior_config(SamplerKind::MG);
  cfg.functionals = {"share-7"};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Geweke, ReferenceDrawsPassNullCalibration) {
  const std::vector<double> alpha{0.1, 0.1, 0.1};
  const std::size_t n = 200;
  Rng gen(7);
  const auto sample = first_coordinate(dirichlet_multinomial_reference(alpha, n, 200, gen));
  const auto cmp = compare_to_reference(sample, alpha, n, DistanceKind::KS, 11);
  // KS standard deviation at 200 draws is roughly 0.87 / sqrt(200) / 2.
  EXPECT_LE(cmp.distance, cmp.noise_floor + 3 * 0.04);
}

TEST(Geweke, LiftedSamplerMatchesPriorAtSmallScale) {
  ExperimentConfig cfg;
  cfg.model = ModelSpec::gaussian({1.0, 1.0, 1.0}, {0.0}, 1.0, 9.0);
  cfg.data.source = DataSource::Simulate;
  cfg.data.n = 50;
  cfg.samplers = {{SamplerKind::NR, 0.5, 1.0}};
  cfg.replicates = 200;
  cfg.sweeps = 30;
  cfg.seed = 3;
  const auto report = geweke_experiment(cfg, DistanceKind::KS);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_LE(report.rows[0].distance, report.rows[0].noise_floor + 0.1);
}

TEST(Io, DatasetRoundTrip) {
  const auto dir = scratch_dir("io");
  const auto data = Dataset::from_values(2, {0.1, -2.5, 1e-17, 3.0});
  write_dataset_csv((dir / "d.csv").string(), data);
  const auto back = read_dataset_csv((dir / "d.csv").string());
  ASSERT_EQ(back.size(), 2u);
  ASSERT_EQ(back.dim(), 2u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(back.values()[i], data.values()[i]);
  std::ofstream(dir / "bad.csv") << "1.0,2.0\n3.0\n";
  EXPECT_THROW(read_dataset_csv((dir / "bad.csv").string()), std::runtime_error);
  fs::remove_all(dir);
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -0.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
}
