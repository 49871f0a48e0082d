// Acceptance runner: one PASS/FAIL line per criterion.
//   acceptance                 run everything
//   acceptance --only C7       run one criterion
//   acceptance --full          Geweke check at n=1000, R=300

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "liftmix/checks.hpp"
#include "liftmix/experiments.hpp"
#include "liftmix/simulate.hpp"

using namespace liftmix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  std::string title;
  double budget_seconds = 0.0;  // 0: no runtime bound
  std::function<Outcome()> run;
};

struct Options {
  std::size_t threads = 0;
  bool full = false;
  std::uint64_t seed = 1;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Outcome from_rows(const std::vector<checks::CheckRow>& rows, const std::vector<std::string>& names) {
  Outcome out{true, ""};
  std::ostringstream os;
  for (const auto& name : names) {
    std::size_t count = 0;
    for (const auto& r : rows) count += r.check == name;
    const auto [w, ok] = checks::worst(rows, name);
    out.pass = out.pass && ok;
    os << name << ": " << count << " rows, worst " << fmt(w) << (ok ? "" : " FAILED") << "; ";
  }
  for (const auto& r : rows) {
    if (!r.pass) {
      os << "[" << r.check << " " << r.instance << " value=" << fmt(r.value) << " bound=" << fmt(r.bound) << "] ";
      break;
    }
  }
  out.detail = os.str();
  return out;
}

std::vector<checks::CheckRow> filtered(const std::vector<checks::CheckRow>& rows,
                                       const std::vector<std::string>& names) {
  std::vector<checks::CheckRow> out;
  for (const auto& r : rows) {
    if (std::find(names.begin(), names.end(), r.check) != names.end()) out.push_back(r);
  }
  return out;
}

std::vector<checks::CheckRow> grid_rows(bool variances) {
  const checks::ExactGrid grid;
  std::vector<checks::CheckRow> rows;
  for (const auto& inst : checks::exact_instances(grid)) {
    auto part = checks::exact_instance_checks(inst, grid, variances);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

ModelSpec gaussian_model(std::vector<double> alpha) { return ModelSpec::gaussian(std::move(alpha), {0.0}, 1.0, 1.0); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

Outcome c1() {
  const auto rows = filtered(grid_rows(false), {"invariance", "row-sum", "negative-entry", "detailed-balance-r"});
  return from_rows(rows, {"invariance", "detailed-balance-r", "row-sum", "negative-entry"});
}

Outcome c2() {
  const std::size_t n = 8;
  const auto v = checks::singleton_move_values(n);
  const double dn = static_cast<double>(n);
  const double want_mg = 2.0 / (dn * (dn + 2.0));
  const double want_r = 1.0 / (6.0 * dn);
  const double dev_mg = std::abs(v.p_mg - want_mg);
  const double dev_r = std::abs(v.p_r - want_r);
  std::ostringstream os;
  os.precision(12);
  os << "P_MG=" << v.p_mg << " vs 2/(n(n+2))=" << want_mg << " (dev " << fmt(dev_mg) << "); P_R=" << v.p_r
     << " vs 1/(6n)=" << want_r << " (dev " << fmt(dev_r) << ")";
  return {dev_mg <= 1e-12 && dev_r <= 1e-12, os.str()};
}

Outcome c3() {
  const auto rows = filtered(grid_rows(true), {"ordering-nr-r", "ordering-r-mg"});
  return from_rows(rows, {"ordering-nr-r", "ordering-r-mg"});
}

Outcome c4() { return from_rows(checks::eigenvalue_checks({10, 20, 30}), {"second-eigenvalue"}); }

Outcome c5() {
  auto rows = checks::drift_checks(50, 3);
  for (auto& r : checks::second_moment_checks()) rows.push_back(std::move(r));
  return from_rows(rows, {"mg-drift", "mg-second-moment-rate"});
}

Outcome c6() {
  return from_rows(checks::expansion_checks(), {"nr-acceptance-expansion", "nr-acceptance-unit-alpha"});
}

Outcome c7(const Options& opt) {
  limits::RescaledComparison mg;
  mg.kernel = limits::RescaledKernel::MG;
  mg.replicates = 2000;
  mg.seed = opt.seed;
  mg.threads = opt.threads;
  limits::RescaledComparison nr = mg;
  nr.kernel = limits::RescaledKernel::NR;
  nr.replicates = 20000;
  nr.M = 100.0;
  const std::vector<std::size_t> ns{200, 800};
  std::vector<checks::CheckRow> rows{checks::rescaled_check(mg, ns).row, checks::rescaled_check(nr, ns).row};
  Outcome out = from_rows(rows, {"rescaled-chain-vs-limit"});
  std::ostringstream os;
  for (const auto& r : rows) {
    os << "{" << r.instance << " drop=" << fmt(r.value) << " need>" << fmt(r.bound) << (r.pass ? "" : " FAILED")
       << "} ";
  }
  out.detail = os.str();
  return out;
}

Outcome c8(const Options& opt) {
  const std::size_t n = opt.full ? 1000 : 500;
  const std::size_t R = opt.full ? 300 : 200;
  std::ostringstream os;
  bool pass = true;
  double nr_small = 0.0;
  double mg_small = 0.0;
  for (double a : {1.0, 0.1}) {
    ExperimentConfig cfg;
    cfg.model = gaussian_model({a, a, a});
    cfg.data.source = DataSource::Simulate;
    cfg.data.n = n;
    cfg.samplers = {SamplerConfig{SamplerKind::NR, 0.5, 1.0}};
    if (a < 1.0) cfg.samplers.push_back(SamplerConfig{SamplerKind::MG, 0.5, 1.0});
    cfg.replicates = R;
    cfg.sweeps = 100;
    cfg.functionals = {"share-1"};
    cfg.seed = opt.seed + (a < 1.0 ? 1 : 0);
    cfg.threads = opt.threads;
    const auto report = geweke_experiment(cfg, DistanceKind::KS);
    for (const auto& row : report.rows) {
      os << "alpha=" << a << " " << to_string(row.kernel) << " KS=" << fmt(row.distance)
         << " floor=" << fmt(row.noise_floor) << "; ";
      if (row.kernel == SamplerKind::NR) {
        const bool ok = row.distance <= row.noise_floor + 0.07;
        pass = pass && ok;
        if (!ok) os << "(NR above floor+0.07) ";
        if (a < 1.0) nr_small = row.distance;
      } else {
        mg_small = row.distance;
      }
    }
  }
  const bool separated = mg_small >= 3.0 * nr_small;
  os << "MG/NR at alpha=0.1: " << fmt(mg_small / nr_small) << (separated ? "" : " (< 3)");
  return {pass && separated, os.str()};
}

Outcome c9(const Options& opt) {
  ExperimentConfig cfg;
  cfg.model = gaussian_model({0.5, 0.5});
  cfg.data.source = DataSource::Mixture;
  cfg.data.n = 2000;
  cfg.data.mixture = {{0.9, 0.1}, {0.9, -0.9}, 1.0};
  cfg.samplers = {SamplerConfig{SamplerKind::MG, 0.5, 1.0}, SamplerConfig{SamplerKind::NR, 0.5, 1.0}};
  cfg.replicates = 50;
  cfg.sweeps = 150;
  cfg.functionals = {"largest-share"};
  cfg.seed = opt.seed;
  cfg.threads = opt.threads;
  const auto result = run_replicates(cfg);
  std::vector<double> med;
  for (const auto& recs : result.per_sampler) {
    std::vector<double> dev;
    for (const auto& rec : recs) dev.push_back(std::abs(rec.traces[0].back() - 0.9));
    med.push_back(median(dev));
  }
  const bool pass = 2.0 * med[1] <= med[0];
  return {pass, "median |largest - 0.9|: MG=" + fmt(med[0]) + " NR=" + fmt(med[1]) + " ratio=" + fmt(med[0] / med[1])};
}

Outcome c10(const Options& opt) {
  const auto model = gaussian_model({1.0, 1.0, 1.0});
  const auto sim = simulate_dataset(model, 200, stream_seed(opt.seed, 0xC10ULL));
  const auto cmp = marginal_vs_conditional_variance(model, sim.data, 10'000'000ULL, 100, opt.seed, opt.threads);
  const bool pass = cmp.mg.variance <= cmp.cd.variance + 2.0 * cmp.combined_std_error;
  return {pass, "Var(MG)=" + fmt(cmp.mg.variance) + " Var(CD)=" + fmt(cmp.cd.variance) +
                    " combined se=" + fmt(cmp.combined_std_error)};
}

Outcome c11(const Options& opt) {
  const std::size_t K = 50;
  std::vector<double> alpha(K, 1.0 / static_cast<double>(K - 1));
  alpha[0] = 1.0;
  ExperimentConfig cfg;
  cfg.model = ModelSpec::prior_only(alpha);
  cfg.data.source = DataSource::Prior;
  cfg.data.n = 1000;
  cfg.samplers = {SamplerConfig{SamplerKind::NR, 0.5, 1.0}, SamplerConfig{SamplerKind::QNR, 0.5, 1.0}};
  cfg.replicates = 300;
  cfg.sweeps = 100;
  cfg.functionals = {"share-1"};
  cfg.seed = opt.seed;
  cfg.threads = opt.threads;
  const auto result = run_replicates(cfg);
  std::vector<ReferenceComparison> cmp;
  for (const auto& recs : result.per_sampler) {
    cmp.push_back(compare_to_reference(final_first_share(recs), alpha, cfg.data.n, DistanceKind::W1, cfg.seed));
  }
  const bool pass = cmp[0].distance + cmp[0].noise_floor < cmp[1].distance;
  return {pass, "W1: NR=" + fmt(cmp[0].distance) + " QNR=" + fmt(cmp[1].distance) +
                    " floor=" + fmt(cmp[0].noise_floor)};
}

Outcome c12(const Options& opt) {
  std::ostringstream os;
  bool pass = true;
  for (const bool prior : {true, false}) {
    ExperimentConfig cfg;
    cfg.model = prior ? ModelSpec::prior_only({1.0, 0.5, 2.0}) : gaussian_model({1.0, 1.0, 1.0});
    cfg.data.source = prior ? DataSource::Prior : DataSource::Simulate;
    cfg.data.n = 60;
    cfg.samplers.clear();
    for (auto kind : {SamplerKind::MG, SamplerKind::R, SamplerKind::NR, SamplerKind::QNR, SamplerKind::CD}) {
      if (prior && kind == SamplerKind::CD) continue;
      cfg.samplers.push_back(SamplerConfig{kind, 0.5, kind == SamplerKind::QNR ? 0.5 : 1.0});
    }
    cfg.replicates = 4;
    cfg.sweeps = 20;
    cfg.seed = opt.seed;
    cfg.threads = opt.threads;
    try {
      const auto result = run_replicates(cfg);
      for (const auto& row : summarize_run(cfg, result)) {
        if (row.check != "cost-identity") continue;
        pass = pass && row.pass;
        os << (prior ? "prior " : "gaussian ") << row.kernel << " mean cost=" << fmt(row.value)
           << (row.pass ? "" : " MISMATCH") << "; ";
      }
    } catch (const std::logic_error& e) {
      pass = false;
      os << "step assertion: " << e.what() << "; ";
    }
  }
  return {pass, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string only;
  Options opt;
  app.add_option("--only", only, "Run a single criterion, e.g. C7");
  app.add_option("--threads", opt.threads, "Worker threads");
  app.add_option("--seed", opt.seed)->capture_default_str();
  app.add_flag("--full", opt.full, "Geweke check at n=1000, R=300");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"C1", "exact invariance and detailed balance", 60.0, c1},
      {"C2", "two-cluster transition probabilities at n=8", 0.0, c2},
      {"C3", "asymptotic-variance ordering", 0.0, c3},
      {"C4", "lumped-chain second eigenvalue", 0.0, c4},
      {"C5", "Gibbs one-step moments", 0.0, c5},
      {"C6", "lifted acceptance expansion", 0.0, c6},
      {"C7", "rescaled chains vs limit processes", 600.0, [&] { return c7(opt); }},
      {"C8", "Geweke test at desk scale", 1200.0, [&] { return c8(opt); }},
      {"C9", "largest cluster on the two-component data", 900.0, [&] { return c9(opt); }},
      {"C10", "marginal vs conditional variance", 0.0, [&] { return c10(opt); }},
      {"C11", "P_NR vs Q_NR at K=50", 0.0, [&] { return c11(opt); }},
      {"C12", "cost accounting", 0.0, [&] { return c12(opt); }},
  };

  bool matched = false;
  bool all_pass = true;
  for (const auto& c : criteria) {
    if (!only.empty() && only != c.id) continue;
    matched = true;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0.0 && secs >= c.budget_seconds) {
      out.pass = false;
      out.detail += " over time budget " + fmt(c.budget_seconds) + "s;";
    }
    std::printf("%s %s %s: %s (%.1fs)\n", c.id.c_str(), out.pass ? "PASS" : "FAIL", c.title.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
    all_pass = all_pass && out.pass;
  }
  if (!matched) {
    std::fprintf(stderr, "unknown criterion %s\n", only.c_str());
    return 2;
  }
  return all_pass ? 0 : 1;
}
