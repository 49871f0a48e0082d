// liftmix: command-line driver for experiments, exact checks and
// scaling-limit checks. Exit codes: 0 pass, 1 check failure, 2 usage or
// config error.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "liftmix/checks.hpp"
#include "liftmix/config.hpp"
#include "liftmix/experiments.hpp"
#include "liftmix/io.hpp"
#include "liftmix/simulate.hpp"

#ifndef LIFTMIX_BUILD_ID
#define LIFTMIX_BUILD_ID "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace liftmix;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

/// Files are written into a hidden sibling directory and renamed over the
/// target on commit, so a reader never sees a half-written output.
class OutputDir {
 public:
  OutputDir(fs::path target, bool overwrite) : target_(fs::absolute(std::move(target))) {
    if (fs::exists(target_) && !overwrite) {
      throw UsageError("output directory " + target_.string() + " exists (pass --overwrite to replace it)");
    }
    const std::string tag = "." + target_.filename().string() + ".tmp-" + std::to_string(::getpid());
    staging_ = target_.parent_path() / tag;
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;

  ~OutputDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }

  std::string file(const std::string& name) const { return (staging_ / name).string(); }

  void commit() {
    if (fs::exists(target_)) {
      const fs::path old = target_.parent_path() /
                           ("." + target_.filename().string() + ".old-" + std::to_string(::getpid()));
      fs::remove_all(old);
      fs::rename(target_, old);
      fs::rename(staging_, target_);
      fs::remove_all(old);
    } else {
      fs::rename(staging_, target_);
    }
    committed_ = true;
  }

  const fs::path& target() const { return target_; }

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  std::uint64_t seed = 0;
  json config;
  json summary;
  std::string started;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void write(const std::string& path) const {
    json j;
    j["command"] = command;
    j["argv"] = argv;
    j["build"] = LIFTMIX_BUILD_ID;
    j["seed"] = seed;
    j["config"] = config;
    j["summary"] = summary;
    j["started_utc"] = started;
    j["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream out(path, std::ios::binary);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + path);
  }
};

void print_check_summary(const std::vector<checks::CheckRow>& rows) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> by_check;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (!by_check.count(r.check)) order.push_back(r.check);
    auto& e = by_check[r.check];
    ++e.first;
    e.second += !r.pass;
  }
  for (const auto& name : order) {
    const auto [w, ok] = checks::worst(rows, name);
    const auto& e = by_check[name];
    std::printf("%-28s %6zu rows  worst=%-12.4g %s\n", name.c_str(), e.first, w,
                ok ? "pass" : ("FAIL (" + std::to_string(e.second) + ")").c_str());
  }
  for (const auto& r : rows) {
    if (!r.pass) std::printf("  failed: %s [%s] value=%.6g bound=%.6g\n", r.check.c_str(), r.instance.c_str(), r.value, r.bound);
  }
}

json check_summary_json(const std::vector<checks::CheckRow>& rows) {
  json j;
  j["rows"] = rows.size();
  j["failures"] = checks::count_failures(rows);
  return j;
}

// ---------------------------------------------------------------------------

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  std::string out;
  bool overwrite = false;
};

void add_common(CLI::App* sub, CommonFlags& f, bool out_required) {
  sub->add_option("--seed", f.seed, "Master seed (overrides run.seed)");
  sub->add_option("--threads", f.threads, "Worker threads (default: LIFTMIX_THREADS or all cores)");
  auto* out = sub->add_option("--out", f.out, "Output directory");
  if (out_required) out->description("Output directory (overrides output.dir)");
  sub->add_flag("--overwrite", f.overwrite, "Replace an existing output directory");
}

ExperimentConfig load_with_overrides(const std::string& path, const CommonFlags& f) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (f.seed) cfg.seed = *f.seed;
  cfg.threads = f.threads;
  if (!f.out.empty()) cfg.output_dir = f.out;
  return cfg;
}

int cmd_run(const std::string& config_path, const CommonFlags& f, Manifest& m) {
  const auto cfg = load_with_overrides(config_path, f);
  OutputDir out(cfg.output_dir, f.overwrite);
  const auto result = run_replicates(cfg);
  write_traces_csv(out.file("traces.csv"), cfg, result);
  write_final_csv(out.file("final.csv"), cfg, result);
  const auto report = summarize_run(cfg, result);
  write_report_csv(out.file("report.csv"), report);
  std::size_t failures = 0;
  for (const auto& r : report) failures += !r.pass;
  m.seed = cfg.seed;
  m.config = config_to_json(cfg);
  m.summary = {{"samplers", cfg.samplers.size()}, {"replicates", cfg.replicates},
               {"sweeps", cfg.sweeps}, {"report_failures", failures}};
  m.write(out.file("manifest.json"));
  out.commit();
  std::printf("wrote %s (%zu sampler(s) x %zu replicate(s))\n", out.target().c_str(), cfg.samplers.size(),
              cfg.replicates);
  return failures ? kFail : kPass;
}

int cmd_geweke(const std::string& config_path, const std::string& distance, double tolerance, const CommonFlags& f,
               Manifest& m) {
  const auto cfg = load_with_overrides(config_path, f);
  if (cfg.data.source != DataSource::Simulate && cfg.data.source != DataSource::Prior) {
    throw UsageError("geweke needs data.source = simulate or prior");
  }
  DistanceKind kind;
  try {
    kind = parse_distance_kind(distance);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  OutputDir out(cfg.output_dir, f.overwrite);
  const auto report = geweke_experiment(cfg, kind);
  ExperimentConfig echo = cfg;
  echo.fresh_data = true;
  write_traces_csv(out.file("traces.csv"), echo, report.result);
  write_final_csv(out.file("final.csv"), echo, report.result);
  std::vector<ReportRow> rows;
  for (const auto& r : report.rows) {
    const double bound = r.noise_floor + tolerance;
    rows.push_back({"geweke-" + std::string(to_string(kind)), std::string(to_string(r.kernel)), r.distance, bound,
                    r.distance <= bound});
    std::printf("%-4s %s=%.4f  noise floor=%.4f  bound=%.4f  %s\n", std::string(to_string(r.kernel)).c_str(),
                std::string(to_string(kind)).c_str(), r.distance, r.noise_floor, bound,
                r.distance <= bound ? "pass" : "FAIL");
  }
  for (auto& r : summarize_run(echo, report.result)) rows.push_back(std::move(r));
  write_report_csv(out.file("report.csv"), rows);
  std::size_t failures = 0;
  for (const auto& r : rows) failures += !r.pass;
  m.seed = cfg.seed;
  m.config = config_to_json(echo);
  m.config["geweke"] = {{"distance", to_string(kind)}, {"tolerance", tolerance}};
  m.summary = {{"samplers", cfg.samplers.size()}, {"replicates", cfg.replicates}, {"report_failures", failures}};
  m.write(out.file("manifest.json"));
  out.commit();
  return failures ? kFail : kPass;
}

int finish_checks(const std::vector<checks::CheckRow>& rows, const CommonFlags& f, Manifest& m,
                  const std::string& csv_name) {
  print_check_summary(rows);
  const std::size_t failures = checks::count_failures(rows);
  m.summary = check_summary_json(rows);
  if (!f.out.empty()) {
    OutputDir out(f.out, f.overwrite);
    checks::write_check_csv(out.file(csv_name), rows);
    m.write(out.file("manifest.json"));
    out.commit();
  }
  std::printf("%zu check(s), %zu failure(s)\n", rows.size(), failures);
  return failures ? kFail : kPass;
}

int cmd_exact_check(const checks::ExactGrid& grid, const CommonFlags& f, Manifest& m) {
  if (grid.max_n < grid.min_n || grid.min_n < 1 || grid.max_k < 2) throw UsageError("invalid grid bounds");
  if (f.out.empty() == false && fs::exists(f.out) && !f.overwrite) {
    throw UsageError("output directory " + f.out + " exists (pass --overwrite to replace it)");
  }
  const auto rows = checks::exact_check_battery(grid);
  const auto r1 = checks::singleton_move_values(8);
  std::printf("singleton move at n=8: P_MG(c,c')=%.15g (2/(n(n+2))=%.15g)  P_R(c,c')=%.15g (1/(2n)=%.15g)\n", r1.p_mg,
              2.0 / 80.0, r1.p_r, 1.0 / 16.0);
  m.seed = grid.seed;
  m.config = {{"min_n", grid.min_n}, {"max_n", grid.max_n}, {"max_k", grid.max_k}, {"xi", grid.xis},
              {"s", grid.ss},        {"perturb", grid.perturb}};
  return finish_checks(rows, f, m, "report.csv");
}

struct LimitsFlags {
  std::vector<std::size_t> ns{200, 800};
  std::size_t mg_replicates = 2000;
  std::size_t nr_replicates = 20000;
  std::size_t limit_draws = 20000;
  std::size_t drift_max_n = 50;
  double dt = 1e-4;
  double M = 100.0;
  double xi = 0.5;
  bool deterministic_only = false;
};

int cmd_limits_check(const LimitsFlags& lf, const CommonFlags& f, Manifest& m) {
  if (lf.ns.size() < 2) throw UsageError("--ns needs at least two values");
  for (std::size_t n : lf.ns) {
    if (n % 2 != 0) throw UsageError("--ns values must be even (x0 = (1/2, 1/2))");
  }
  if (f.out.empty() == false && fs::exists(f.out) && !f.overwrite) {
    throw UsageError("output directory " + f.out + " exists (pass --overwrite to replace it)");
  }
  const std::uint64_t seed = f.seed.value_or(1);
  std::vector<checks::CheckRow> rows = checks::drift_checks(lf.drift_max_n, 3);
  for (auto& r : checks::second_moment_checks()) rows.push_back(std::move(r));
  for (auto& r : checks::expansion_checks()) rows.push_back(std::move(r));
  if (!lf.deterministic_only) {
    limits::RescaledComparison mg;
    mg.kernel = limits::RescaledKernel::MG;
    mg.replicates = lf.mg_replicates;
    mg.limit_draws = lf.limit_draws;
    mg.dt = lf.dt;
    mg.seed = seed;
    mg.threads = f.threads;
    rows.push_back(checks::rescaled_check(mg, lf.ns).row);
    limits::RescaledComparison nr = mg;
    nr.kernel = limits::RescaledKernel::NR;
    nr.replicates = lf.nr_replicates;
    nr.M = lf.M;
    nr.xi = lf.xi;
    rows.push_back(checks::rescaled_check(nr, lf.ns).row);
  }
  m.seed = seed;
  m.config = {{"ns", lf.ns},
              {"mg_replicates", lf.mg_replicates},
              {"nr_replicates", lf.nr_replicates},
              {"limit_draws", lf.limit_draws},
              {"drift_max_n", lf.drift_max_n},
              {"dt", lf.dt},
              {"M", lf.M},
              {"xi", lf.xi},
              {"deterministic_only", lf.deterministic_only}};
  return finish_checks(rows, f, m, "limits.csv");
}

int cmd_simulate_data(const std::string& config_path, const std::string& out_path, const CommonFlags& f) {
  const auto cfg = load_with_overrides(config_path, f);
  if (cfg.data.source != DataSource::Simulate && cfg.data.source != DataSource::Mixture) {
    throw UsageError("simulate-data needs data.source = simulate or mixture");
  }
  if (fs::exists(out_path) && !f.overwrite) throw UsageError(out_path + " exists (pass --overwrite to replace it)");
  json truth;
  truth["seed"] = cfg.seed;
  truth["n"] = cfg.data.n;
  if (cfg.data.source == DataSource::Simulate) {
    const auto sim = simulate_dataset(cfg.model, cfg.data.n, stream_seed(cfg.seed, 0xDA7AULL));
    write_dataset_csv(out_path, sim.data);
    truth["weights"] = sim.weights;
    truth["atoms"] = sim.atoms;
  } else {
    Rng gen(stream_seed(cfg.seed, 0xDA7AULL));
    const auto sim = simulate_fixed_mixture(cfg.data.mixture, cfg.data.n, gen);
    write_dataset_csv(out_path, sim.data);
    truth["weights"] = cfg.data.mixture.weights;
    truth["atoms"] = cfg.data.mixture.means;
    truth["variance"] = cfg.data.mixture.variance;
  }
  truth["config"] = config_to_json(cfg);
  truth["build"] = LIFTMIX_BUILD_ID;
  std::ofstream side(out_path + ".truth.json", std::ios::binary);
  side << truth.dump(2) << '\n';
  std::printf("wrote %s and %s.truth.json\n", out_path.c_str(), out_path.c_str());
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lifted and marginal samplers for finite mixtures: experiments and exact checks"};
  app.require_subcommand(1);

  CommonFlags common;
  std::string config_path;

  auto* run = app.add_subcommand("run", "Run replicate chains from a JSON config");
  run->add_option("config", config_path, "Config file")->required();
  add_common(run, common, true);

  std::string distance = "ks";
  double tolerance = 0.07;
  auto* geweke = app.add_subcommand("geweke", "Joint-distribution test against the Dirichlet-multinomial law");
  geweke->add_option("config", config_path, "Config file")->required();
  geweke->add_option("--distance", distance, "ks or w1")->capture_default_str();
  geweke->add_option("--tolerance", tolerance, "Allowed excess over the noise floor")->capture_default_str();
  add_common(geweke, common, true);

  checks::ExactGrid grid;
  auto* exact = app.add_subcommand("exact-check", "Exact invariance, ordering and eigenvalue checks on tiny instances");
  exact->add_option("--min-n", grid.min_n)->capture_default_str();
  exact->add_option("--max-n", grid.max_n)->capture_default_str();
  exact->add_option("--max-k", grid.max_k)->capture_default_str();
  exact->add_flag("--perturb", grid.perturb, "Corrupt one kernel row; the battery must then fail");
  add_common(exact, common, false);

  LimitsFlags lf;
  auto* lim = app.add_subcommand("limits-check", "Moment, acceptance-expansion and rescaled-chain checks");
  lim->add_option("--ns", lf.ns, "Chain sizes for the rescaled comparison")->delimiter(',')->capture_default_str();
  lim->add_option("--mg-replicates", lf.mg_replicates)->capture_default_str();
  lim->add_option("--nr-replicates", lf.nr_replicates)->capture_default_str();
  lim->add_option("--limit-draws", lf.limit_draws)->capture_default_str();
  lim->add_option("--drift-max-n", lf.drift_max_n)->capture_default_str();
  lim->add_option("--dt", lf.dt, "Limit-process time step")->capture_default_str();
  lim->add_option("--M", lf.M, "Interior threshold for the NR freeze")->capture_default_str();
  lim->add_option("--xi", lf.xi)->capture_default_str();
  lim->add_flag("--deterministic-only", lf.deterministic_only, "Skip the Monte Carlo comparisons");
  add_common(lim, common, false);

  std::string data_out;
  auto* sim = app.add_subcommand("simulate-data", "Draw a dataset from the model in a config");
  sim->add_option("config", config_path, "Config file")->required();
  sim->add_option("--out", data_out, "Dataset CSV path")->required();
  sim->add_option("--seed", common.seed, "Master seed (overrides run.seed)");
  sim->add_flag("--overwrite", common.overwrite);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kUsage;
  }

  Manifest manifest;
  manifest.started = utc_now();
  manifest.argv.assign(argv, argv + argc);
  try {
    if (common.seed) grid.seed = *common.seed;
    if (*run) {
      manifest.command = "run";
      return cmd_run(config_path, common, manifest);
    }
    if (*geweke) {
      manifest.command = "geweke";
      return cmd_geweke(config_path, distance, tolerance, common, manifest);
    }
    if (*exact) {
      manifest.command = "exact-check";
      return cmd_exact_check(grid, common, manifest);
    }
    if (*lim) {
      manifest.command = "limits-check";
      return cmd_limits_check(lf, common, manifest);
    }
    if (*sim) return cmd_simulate_data(config_path, data_out, common);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFail;
  }
  return kUsage;
}
