#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "liftmix/allocation.hpp"
#include "liftmix/io.hpp"
#include "liftmix/model.hpp"
#include "liftmix/parallel.hpp"
#include "liftmix/random.hpp"
#include "liftmix/samplers.hpp"
#include "liftmix/simulate.hpp"
#include "liftmix/stats.hpp"
#include "liftmix/velocity.hpp"

namespace liftmix {

enum class SamplerKind { MG, R, NR, QNR, CD };

inline std::string_view to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::MG: return "mg";
    case SamplerKind::R: return "r";
    case SamplerKind::NR: return "nr";
    case SamplerKind::QNR: return "qnr";
    case SamplerKind::CD: return "cd";
  }
  return "unknown";
}

inline SamplerKind parse_sampler_kind(std::string_view s) {
  if (s == "mg") return SamplerKind::MG;
  if (s == "r") return SamplerKind::R;
  if (s == "nr") return SamplerKind::NR;
  if (s == "qnr") return SamplerKind::QNR;
  if (s == "cd") return SamplerKind::CD;
  throw std::invalid_argument("unknown sampler kind '" + std::string(s) + "'");
}

struct SamplerConfig {
  SamplerKind kind = SamplerKind::NR;
  double xi = 0.5;
  double s = 1.0;

  void validate() const {
    if (!(xi >= 0.0) || !std::isfinite(xi)) throw std::invalid_argument("sampler.xi must be non-negative");
    if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("sampler.s must lie in (0, 1]");
  }
};

enum class DataSource {
  Prior,     ///< No observations; the model must be PriorOnly.
  Simulate,  ///< One dataset drawn from the model.
  Mixture,   ///< Fixed one-dimensional Gaussian mixture.
  File,      ///< CSV file.
};

inline std::string_view to_string(DataSource s) {
  switch (s) {
    case DataSource::Prior: return "prior";
    case DataSource::Simulate: return "simulate";
    case DataSource::Mixture: return "mixture";
    case DataSource::File: return "file";
  }
  return "unknown";
}

inline DataSource parse_data_source(std::string_view s) {
  if (s == "prior") return DataSource::Prior;
  if (s == "simulate") return DataSource::Simulate;
  if (s == "mixture") return DataSource::Mixture;
  if (s == "file") return DataSource::File;
  throw std::invalid_argument("unknown data.source '" + std::string(s) + "'");
}

struct DataConfig {
  DataSource source = DataSource::Prior;
  std::size_t n = 100;
  std::string path;
  bool header = false;
  FixedMixture mixture{{0.9, 0.1}, {0.9, -0.9}, 1.0};
};

/// Functional of the allocation recorded once per sweep.
struct Functional {
  std::string name;
  enum class Kind { LargestShare, Share } kind = Kind::LargestShare;
  /// 0-based component for Kind::Share.
  std::size_t component = 0;

  double operator()(const AllocationState& state) const {
    const double n = static_cast<double>(state.size());
    if (kind == Kind::Share) return static_cast<double>(state.count(component)) / n;
    std::size_t top = 0;
    for (std::size_t k = 0; k < state.num_components(); ++k) top = std::max(top, state.count(k));
    return static_cast<double>(top) / n;
  }
};

/// Registered names: "largest-share" (max_k n_k / n) and "share-<k>"
/// (n_k / n, k 1-based).
inline Functional parse_functional(const std::string& name, std::size_t K) {
  if (name == "largest-share") return {name, Functional::Kind::LargestShare, 0};
  if (name.rfind("share-", 0) == 0) {
    const std::string digits = name.substr(6);
    if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos) {
      const auto k = static_cast<std::size_t>(std::stoul(digits));
      if (k >= 1 && k <= K) return {name, Functional::Kind::Share, k - 1};
    }
  }
  throw std::invalid_argument("unknown functional '" + name + "'");
}

struct ExperimentConfig {
  ModelSpec model = ModelSpec::prior_only({1.0, 1.0});
  DataConfig data;
  std::vector<SamplerConfig> samplers{SamplerConfig{}};
  std::size_t replicates = 1;
  /// Sweeps of n kernel applications each (n lifted sub-steps for QNR).
  std::size_t sweeps = 1;
  std::vector<std::string> functionals{"largest-share", "share-1"};
  std::uint64_t seed = 1;
  InitMode init = InitMode::UniformRandom;
  std::string output_dir = "out";
  /// Draw a fresh dataset from the model for every replicate.
  bool fresh_data = false;
  std::size_t threads = 0;

  void validate() const {
    model.validate();
    if (replicates < 1) throw std::invalid_argument("run.replicates must be >= 1");
    if (samplers.empty()) throw std::invalid_argument("sampler.kind must name at least one sampler");
    for (const auto& s : samplers) s.validate();
    for (const auto& f : functionals) parse_functional(f, model.num_components());
    if (data.n < 1) throw std::invalid_argument("data.n must be >= 1");
    if (data.source == DataSource::Prior && model.kind != ModelKind::PriorOnly) {
      throw std::invalid_argument("data.source = prior requires model.kind = prior");
    }
    if (data.source != DataSource::Prior && model.kind == ModelKind::PriorOnly) {
      throw std::invalid_argument("model.kind = prior requires data.source = prior");
    }
    if (data.source == DataSource::Mixture) {
      data.mixture.validate();
      if (model.kind != ModelKind::GaussianIso || model.dim != 1) {
        throw std::invalid_argument("data.source = mixture requires a one-dimensional gaussian model");
      }
    }
    if (data.source == DataSource::File && data.path.empty()) throw std::invalid_argument("data.path is required");
    if (fresh_data && data.source != DataSource::Simulate && data.source != DataSource::Prior) {
      throw std::invalid_argument("fresh data per replicate needs data.source = simulate or prior");
    }
    if (init == InitMode::Given) throw std::invalid_argument("run.init = given is not available from a config");
  }
};

struct ReplicateRecord {
  std::size_t replicate = 0;
  SamplerKind kernel = SamplerKind::MG;
  /// traces[f][t] is functional f after t sweeps (t = 0 is the initial state).
  std::vector<std::vector<double>> traces;
  /// Final counts; proportions are counts / n.
  std::vector<std::size_t> final_counts;
  std::size_t n = 0;
  /// Conditional-distribution evaluations.
  std::uint64_t cost = 0;
  std::uint64_t applications = 0;

  std::vector<double> final_proportions() const {
    std::vector<double> p(final_counts.size());
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = static_cast<double>(final_counts[k]) / static_cast<double>(n);
    return p;
  }
};

/// Per-step cost contract: K for Gibbs and conditional allocation updates, 0
/// for the conditional parameter update, 2 per lifted or pair move.
inline void assert_step_cost(const StepOutcome& out, SamplerKind kernel, std::size_t K) {
  std::uint64_t expected = 0;
  switch (out.kind) {
    case MoveKind::MgUpdate:
    case MoveKind::CdAllocation:
      expected = K;
      break;
    case MoveKind::CdParams:
      expected = 0;
      break;
    default:
      expected = kPairMoveCost * out.substeps;
      break;
  }
  if (out.cost != expected) {
    throw std::logic_error("cost accounting violated by " + std::string(to_string(kernel)) + ": " +
                           std::string(to_string(out.kind)) + " reported " + std::to_string(out.cost) +
                           ", expected " + std::to_string(expected));
  }
}

/// Expected total cost of `applications` kernel applications for kernels with
/// a fixed per-application cost (all but CD).
inline std::optional<std::uint64_t> expected_total_cost(SamplerKind kind, std::size_t K, std::uint64_t applications) {
  switch (kind) {
    case SamplerKind::MG: return applications * K;
    case SamplerKind::R:
    case SamplerKind::NR:
    case SamplerKind::QNR: return applications * kPairMoveCost;
    case SamplerKind::CD: return std::nullopt;
  }
  return std::nullopt;
}

/// A chain of any kind: allocation, velocity table, conditional parameters
/// and the geometric-run scheduler, advanced one kernel application at a time.
class Chain {
 public:
  Chain(SamplerConfig sampler, const ModelSpec& model, ChainState state)
      : sampler_(sampler), model_(&model), state_(std::move(state)) {}

  template <class Gen>
  void prepare(Gen& gen) {
    if (sampler_.kind == SamplerKind::CD) resample_params(params_, state_.allocation, *model_, gen);
  }

  /// One kernel application (one lifted sub-step for QNR). The cost contract
  /// is checked on every step.
  template <class Gen>
  StepOutcome step(Gen& gen) {
    StepOutcome out;
    switch (sampler_.kind) {
      case SamplerKind::MG: out = step_mg(state_.allocation, *model_, gen); break;
      case SamplerKind::R: out = step_r(state_.allocation, *model_, gen); break;
      case SamplerKind::NR: out = step_nr(state_.allocation, state_.velocity, *model_, sampler_.xi, gen); break;
      case SamplerKind::QNR:
        out = qnr_.advance(state_.allocation, state_.velocity, *model_, sampler_.s, sampler_.xi, gen);
        break;
      case SamplerKind::CD: out = step_cd(state_.allocation, params_, *model_, gen); break;
    }
    assert_step_cost(out, sampler_.kind, model_->num_components());
    cost_ += out.cost;
    ++applications_;
    return out;
  }

  const AllocationState& allocation() const { return state_.allocation; }
  const VelocityState& velocity() const { return state_.velocity; }
  std::uint64_t cost() const { return cost_; }
  std::uint64_t applications() const { return applications_; }

 private:
  SamplerConfig sampler_;
  const ModelSpec* model_;
  ChainState state_;
  ConditionalParams params_;
  QnrScheduler qnr_;
  std::uint64_t cost_ = 0;
  std::uint64_t applications_ = 0;
};

/// Dataset for the whole run, or for one replicate when `fresh_data` is set.
inline Dataset build_dataset(const ExperimentConfig& cfg, std::optional<std::size_t> replicate = std::nullopt) {
  const std::uint64_t data_seed = stream_seed(cfg.seed, replicate ? 0x100000000ULL + *replicate : 0xDA7AULL);
  switch (cfg.data.source) {
    case DataSource::Prior:
      return Dataset::prior_only(cfg.data.n);
    case DataSource::Simulate:
      return simulate_dataset(cfg.model, cfg.data.n, data_seed).data;
    case DataSource::Mixture: {
      Rng gen(data_seed);
      return simulate_fixed_mixture(cfg.data.mixture, cfg.data.n, gen).data;
    }
    case DataSource::File:
      return read_dataset_csv(cfg.data.path, cfg.data.header);
  }
  throw std::logic_error("unreachable data source");
}

/// Runs `cfg.replicates` chains of one sampler. Replicate r uses the stream
/// stream_seed(seed, r); every sampler sees the same initial allocation for a
/// given replicate.
inline std::vector<ReplicateRecord> run_sampler(const ExperimentConfig& cfg, const SamplerConfig& sampler,
                                                const Dataset* shared_data) {
  const std::size_t K = cfg.model.num_components();
  std::vector<Functional> functionals;
  for (const auto& name : cfg.functionals) functionals.push_back(parse_functional(name, K));
  std::vector<ReplicateRecord> records(cfg.replicates);
  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    std::optional<Dataset> own;
    if (cfg.fresh_data) own = build_dataset(cfg, r);
    const Dataset& data = own ? *own : *shared_data;
    Rng gen(stream_seed(cfg.seed, r));
    Chain chain(sampler, cfg.model, init_state(cfg.init, cfg.model, data, gen));
    chain.prepare(gen);
    const std::size_t n = data.size();

    ReplicateRecord rec;
    rec.replicate = r;
    rec.kernel = sampler.kind;
    rec.n = n;
    rec.traces.assign(functionals.size(), {});
    for (std::size_t f = 0; f < functionals.size(); ++f) {
      rec.traces[f].reserve(cfg.sweeps + 1);
      rec.traces[f].push_back(functionals[f](chain.allocation()));
    }
    for (std::size_t sweep = 0; sweep < cfg.sweeps; ++sweep) {
      for (std::size_t s = 0; s < n; ++s) chain.step(gen);
      for (std::size_t f = 0; f < functionals.size(); ++f) rec.traces[f].push_back(functionals[f](chain.allocation()));
    }
    rec.final_counts = chain.allocation().counts();
    rec.cost = chain.cost();
    rec.applications = chain.applications();
    if (const auto expect = expected_total_cost(sampler.kind, K, rec.applications); expect && *expect != rec.cost) {
      throw std::logic_error("total cost does not match applications for " + std::string(to_string(sampler.kind)));
    }
    records[r] = std::move(rec);
  });
  return records;
}

struct ExperimentResult {
  /// One entry per configured sampler, in configuration order.
  std::vector<std::vector<ReplicateRecord>> per_sampler;
};

inline ExperimentResult run_replicates(const ExperimentConfig& cfg) {
  cfg.validate();
  std::optional<Dataset> shared;
  if (!cfg.fresh_data) shared = build_dataset(cfg);
  ExperimentResult result;
  for (const auto& sampler : cfg.samplers) {
    result.per_sampler.push_back(run_sampler(cfg, sampler, shared ? &*shared : nullptr));
  }
  return result;
}

/// First-component proportions at the final sweep.
inline std::vector<double> final_first_share(const std::vector<ReplicateRecord>& records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(static_cast<double>(r.final_counts[0]) / static_cast<double>(r.n));
  return out;
}

/// Dirichlet-multinomial proportion vectors: w ~ Dir(alpha), counts ~
/// Multinomial(n, w), returned as counts / n.
template <class Gen>
std::vector<std::vector<double>> dirichlet_multinomial_reference(const std::vector<double>& alpha, std::size_t n,
                                                                 std::size_t draws, Gen& gen) {
  std::vector<std::vector<double>> out(draws);
  for (auto& row : out) {
    const auto w = sample_dirichlet(std::span<const double>(alpha), gen);
    const auto counts = sample_multinomial(n, std::span<const double>(w), gen);
    row.resize(alpha.size());
    for (std::size_t k = 0; k < alpha.size(); ++k) row[k] = static_cast<double>(counts[k]) / static_cast<double>(n);
  }
  return out;
}

inline std::vector<double> first_coordinate(const std::vector<std::vector<double>>& rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[0]);
  return out;
}

struct ReferenceComparison {
  double distance = 0.0;
  /// Distance between the reference sample and an independent reference
  /// sample with as many draws as the chain sample.
  double noise_floor = 0.0;
};

/// Distance of a first-component sample to a large Dirichlet-multinomial
/// reference, with the matching reference-vs-reference noise floor.
inline ReferenceComparison compare_to_reference(const std::vector<double>& sample, const std::vector<double>& alpha,
                                                std::size_t n, DistanceKind kind, std::uint64_t seed,
                                                std::size_t reference_draws = 20000) {
  Rng ref_gen(stream_seed(seed, 0x5EF1ULL));
  const auto reference = first_coordinate(dirichlet_multinomial_reference(alpha, n, reference_draws, ref_gen));
  Rng floor_gen(stream_seed(seed, 0x5EF2ULL));
  const auto second = first_coordinate(dirichlet_multinomial_reference(alpha, n, sample.size(), floor_gen));
  return {distribution_distance(sample, reference, kind), distribution_distance(second, reference, kind)};
}

struct GewekeRow {
  SamplerKind kernel = SamplerKind::MG;
  double distance = 0.0;
  double noise_floor = 0.0;
};

struct GewekeReport {
  DistanceKind kind = DistanceKind::KS;
  std::vector<GewekeRow> rows;
  ExperimentResult result;
};

/// Joint-distribution test: each replicate draws (w, theta, Y) from the model,
/// runs the chain, and the final first-component proportions are compared
/// with the Dirichlet-multinomial prior law.
inline GewekeReport geweke_experiment(ExperimentConfig cfg, DistanceKind kind = DistanceKind::KS) {
  cfg.fresh_data = true;
  GewekeReport report;
  report.kind = kind;
  report.result = run_replicates(cfg);
  for (std::size_t s = 0; s < cfg.samplers.size(); ++s) {
    const auto sample = final_first_share(report.result.per_sampler[s]);
    const auto cmp = compare_to_reference(sample, cfg.model.alpha, cfg.data.n, kind, cfg.seed);
    report.rows.push_back({cfg.samplers[s].kind, cmp.distance, cmp.noise_floor});
  }
  return report;
}

/// Batch means accumulated on the fly, for traces too long to store.
class StreamingBatchMeans {
 public:
  explicit StreamingBatchMeans(std::size_t batch_size) : batch_size_(batch_size) {
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  }

  void push(double v) {
    current_ += v;
    if (++filled_ == batch_size_) {
      means_.push_back(current_ / static_cast<double>(batch_size_));
      current_ = 0.0;
      filled_ = 0;
    }
  }

  BatchMeansEstimate estimate() const {
    if (means_.size() < 2) throw std::logic_error("need at least two complete batches");
    BatchMeansEstimate out;
    out.batch_size = batch_size_;
    out.batches = means_.size();
    out.variance = static_cast<double>(batch_size_) * sample_variance(means_);
    out.std_error = out.variance * std::sqrt(2.0 / static_cast<double>(means_.size() - 1));
    return out;
  }

 private:
  std::size_t batch_size_;
  double current_ = 0.0;
  std::size_t filled_ = 0;
  std::vector<double> means_;
};

struct VarianceComparison {
  BatchMeansEstimate mg;
  BatchMeansEstimate cd;
  /// sqrt(se_mg^2 + se_cd^2).
  double combined_std_error = 0.0;
};

/// Batch-means asymptotic variance of g = n_1 / n per kernel application for
/// the marginal and the conditional sampler on one dataset. Each chain runs
/// 2 * `applications` steps and the first half is discarded.
inline VarianceComparison marginal_vs_conditional_variance(const ModelSpec& model, const Dataset& data,
                                                           std::uint64_t applications, std::size_t batches,
                                                           std::uint64_t seed, std::size_t threads = 0) {
  if (applications < batches * 2) throw std::invalid_argument("too few applications for the batch count");
  const std::size_t batch = static_cast<std::size_t>(applications / batches);
  std::vector<BatchMeansEstimate> est(2);
  parallel_for(2, threads, [&](std::size_t which) {
    SamplerConfig sampler;
    sampler.kind = which == 0 ? SamplerKind::MG : SamplerKind::CD;
    Rng gen(stream_seed(seed, 0));
    Chain chain(sampler, model, init_state(InitMode::UniformRandom, model, data, gen));
    Rng run_gen(stream_seed(seed, 1 + which));
    chain.prepare(run_gen);
    for (std::uint64_t t = 0; t < applications; ++t) chain.step(run_gen);
    StreamingBatchMeans acc(batch);
    const double n = static_cast<double>(data.size());
    for (std::uint64_t t = 0; t < batch * batches; ++t) {
      chain.step(run_gen);
      acc.push(static_cast<double>(chain.allocation().count(0)) / n);
    }
    est[which] = acc.estimate();
  });
  VarianceComparison out{est[0], est[1], 0.0};
  out.combined_std_error = std::sqrt(est[0].std_error * est[0].std_error + est[1].std_error * est[1].std_error);
  return out;
}

/// traces.csv: kernel,replicate,sweep,functional,value
inline void write_traces_csv(const std::string& path, const ExperimentConfig& cfg, const ExperimentResult& result) {
  CsvWriter out(path);
  out.row({"kernel", "replicate", "sweep", "functional", "value"});
  for (std::size_t s = 0; s < result.per_sampler.size(); ++s) {
    for (const auto& rec : result.per_sampler[s]) {
      for (std::size_t f = 0; f < rec.traces.size(); ++f) {
        for (std::size_t t = 0; t < rec.traces[f].size(); ++t) {
          out.field(to_string(rec.kernel)).field(rec.replicate).field(t).field(cfg.functionals[f]);
          out.field(rec.traces[f][t]).end_row();
        }
      }
    }
  }
  out.close();
}

/// final.csv: kernel,replicate,prop_1..prop_K,cost
inline void write_final_csv(const std::string& path, const ExperimentConfig& cfg, const ExperimentResult& result) {
  CsvWriter out(path);
  out.field("kernel").field("replicate");
  for (std::size_t k = 1; k <= cfg.model.num_components(); ++k) out.field("prop_" + std::to_string(k));
  out.field("cost").end_row();
  for (const auto& records : result.per_sampler) {
    for (const auto& rec : records) {
      out.field(to_string(rec.kernel)).field(rec.replicate);
      for (double p : rec.final_proportions()) out.field(p);
      out.field(rec.cost).end_row();
    }
  }
  out.close();
}

struct ReportRow {
  std::string check;
  std::string kernel;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = true;
};

/// report.csv: check,kernel,value,threshold,pass
inline void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
  CsvWriter out(path);
  out.row({"check", "kernel", "value", "threshold", "pass"});
  for (const auto& r : rows) {
    out.field(r.check).field(r.kernel).field(r.value).field(r.threshold).field(r.pass ? "pass" : "fail").end_row();
  }
  out.close();
}

/// Summary rows for a run: total cost identity per kernel and the range of
/// every final proportion vector.
inline std::vector<ReportRow> summarize_run(const ExperimentConfig& cfg, const ExperimentResult& result) {
  std::vector<ReportRow> rows;
  const std::size_t K = cfg.model.num_components();
  for (std::size_t s = 0; s < result.per_sampler.size(); ++s) {
    const auto kind = cfg.samplers[s].kind;
    bool cost_ok = true;
    bool sums_ok = true;
    double mean_cost = 0.0;
    for (const auto& rec : result.per_sampler[s]) {
      if (const auto e = expected_total_cost(kind, K, rec.applications); e && *e != rec.cost) cost_ok = false;
      std::size_t total = 0;
      for (std::size_t c : rec.final_counts) total += c;
      if (total != rec.n) sums_ok = false;
      mean_cost += static_cast<double>(rec.cost);
    }
    mean_cost /= static_cast<double>(result.per_sampler[s].size());
    rows.push_back({"cost-identity", std::string(to_string(kind)), mean_cost, 0.0, cost_ok});
    rows.push_back({"proportions-sum-to-one", std::string(to_string(kind)), sums_ok ? 1.0 : 0.0, 1.0, sums_ok});
  }
  return rows;
}

}  // namespace liftmix
