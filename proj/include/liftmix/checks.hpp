#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "liftmix/exact_oracle.hpp"
#include "liftmix/io.hpp"
#include "liftmix/limits.hpp"
#include "liftmix/parallel.hpp"
#include "liftmix/simulate.hpp"
#include "liftmix/stats.hpp"

namespace liftmix::checks {

struct CheckRow {
  std::string check;
  std::string instance;
  double value = 0.0;
  double bound = 0.0;
  bool pass = true;
};

inline CheckRow at_most(std::string check, std::string instance, double value, double bound) {
  const bool pass = value <= bound;
  return {std::move(check), std::move(instance), value, bound, pass};
}

inline std::size_t count_failures(const std::vector<CheckRow>& rows) {
  std::size_t f = 0;
  for (const auto& r : rows) f += !r.pass;
  return f;
}

/// Largest value among rows named `check` (NaN if none), with the pass flag
/// of all of them.
inline std::pair<double, bool> worst(const std::vector<CheckRow>& rows, const std::string& check) {
  double v = std::numeric_limits<double>::quiet_NaN();
  bool pass = true;
  bool any = false;
  for (const auto& r : rows) {
    if (r.check != check) continue;
    v = any ? std::max(v, r.value) : r.value;
    any = true;
    pass = pass && r.pass;
  }
  return {v, pass && any};
}

/// check,instance,value,bound,pass
inline void write_check_csv(const std::string& path, const std::vector<CheckRow>& rows) {
  CsvWriter out(path);
  out.row({"check", "instance", "value", "bound", "pass"});
  for (const auto& r : rows) {
    out.field(r.check).field(r.instance).field(r.value).field(r.bound).field(r.pass ? "pass" : "fail").end_row();
  }
  out.close();
}

inline std::string format_vector(const std::vector<double>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s + ")";
}

/// (1,...,1), (0.5,...,0.5) and (2,1,...,1).
inline std::vector<std::vector<double>> grid_alphas(std::size_t K) {
  std::vector<double> skew(K, 1.0);
  skew[0] = 2.0;
  return {std::vector<double>(K, 1.0), std::vector<double>(K, 0.5), skew};
}

// ---------------------------------------------------------------------------
// Exact-enumeration battery

struct ExactGrid {
  std::size_t min_n = 2;
  std::size_t max_n = 6;
  std::size_t max_k = 3;
  std::uint64_t seed = 1;
  std::vector<double> xis{0.5, 1.0};
  std::vector<double> ss{0.5, 1.0};
  /// Move a little mass inside one row of the first MG kernel so that the
  /// invariance check must fail.
  bool perturb = false;
};

struct ExactInstance {
  std::string name;
  ModelSpec model;
  Dataset data;
};

/// PriorOnly and one-dimensional Gaussian data (drawn from the model) for
/// every K, n and alpha of the grid.
inline std::vector<ExactInstance> exact_instances(const ExactGrid& grid) {
  std::vector<ExactInstance> out;
  for (std::size_t K = 2; K <= grid.max_k; ++K) {
    for (std::size_t n = grid.min_n; n <= grid.max_n; ++n) {
      for (const auto& alpha : grid_alphas(K)) {
        const std::string base = "K=" + std::to_string(K) + " n=" + std::to_string(n) + " alpha=" + format_vector(alpha);
        out.push_back({base + " data=prior", ModelSpec::prior_only(alpha), Dataset::prior_only(n)});
        const auto gauss = ModelSpec::gaussian(alpha, {0.0}, 1.0, 1.0);
        const auto sim = simulate_dataset(gauss, n, stream_seed(grid.seed, 1000 * K + n));
        out.push_back({base + " data=gaussian", gauss, sim.data});
      }
    }
  }
  return out;
}

inline void perturb_first_row(exact::EnumeratedKernel& kernel, double delta = 1e-3) {
  Eigen::Index big = -1;
  double top = -1.0;
  for (exact::SparseKernel::InnerIterator it(kernel.matrix, 0); it; ++it) {
    if (it.value() > top) {
      top = it.value();
      big = it.col();
    }
  }
  const Eigen::Index other = big == 1 ? 2 : 1;
  kernel.matrix.coeffRef(0, big) -= std::min(delta, top);
  kernel.matrix.coeffRef(0, other) += std::min(delta, top);
}

/// Invariance of every kernel, stochasticity, detailed balance of P_R and
/// minorization of P_R by P_MG / (2(K-1)); with `variances`, also the
/// asymptotic-variance ordering for the three test functionals.
inline std::vector<CheckRow> exact_instance_checks(const ExactInstance& inst, const ExactGrid& grid, bool variances,
                                                   bool perturb = false) {
  using exact::KernelKind;
  std::vector<CheckRow> rows;
  const std::size_t n = inst.data.size();
  const std::size_t K = inst.model.num_components();
  const auto pi = exact::enumerate_target(inst.model, inst.data);
  auto mg = exact::build_kernel(KernelKind::MG, pi, n, K);
  if (perturb) perturb_first_row(mg);
  const auto r = exact::build_kernel(KernelKind::R, pi, n, K);

  auto add_kernel = [&](const exact::EnumeratedKernel& k, const std::string& label) {
    rows.push_back(at_most("invariance", inst.name + " kernel=" + label, exact::check_invariance(k), 1e-10));
    rows.push_back(at_most("row-sum", inst.name + " kernel=" + label, k.max_row_sum_error(), 1e-12));
    rows.push_back(at_most("negative-entry", inst.name + " kernel=" + label, std::max(0.0, -k.min_entry()), 0.0));
  };
  add_kernel(mg, "mg");
  add_kernel(r, "r");
  rows.push_back(at_most("detailed-balance-r", inst.name, exact::detailed_balance_violation(r), 1e-10));
  rows.push_back(at_most("minorization", inst.name, std::max(0.0, exact::minorization_violation(mg, r)), 1e-12));

  struct Gs {
    std::string name;
    exact::AllocationFunctional g;
    double v_r;
  };
  std::vector<Gs> gs;
  if (variances) {
    for (const auto& [name, g] : exact::test_functionals(K)) {
      const auto values = exact::evaluate(mg.space, g);
      const double v_mg = exact::asymptotic_variance_exact(mg, values);
      const double v_r = exact::asymptotic_variance_exact(r, values);
      const double var_pi = exact::stationary_variance(mg, values);
      const double c = 2.0 * static_cast<double>(K - 1);
      rows.push_back(at_most("ordering-r-mg", inst.name + " g=" + name, v_r - (c * v_mg + (2.0 * K - 3.0) * var_pi),
                             1e-8));
      gs.push_back({name, g, v_r});
    }
  }

  for (double xi : grid.xis) {
    const auto nr = exact::build_kernel(KernelKind::NR, pi, n, K, xi);
    add_kernel(nr, "nr xi=" + format_double(xi));
    if (variances) {
      for (const auto& e : gs) {
        const double v_nr = exact::asymptotic_variance_exact(nr, exact::evaluate(nr.space, e.g));
        rows.push_back(at_most("ordering-nr-r", inst.name + " xi=" + format_double(xi) + " g=" + e.name,
                               v_nr - e.v_r, 1e-8));
      }
    }
    for (double s : grid.ss) {
      const auto qnr = exact::build_kernel(KernelKind::QNR, pi, n, K, xi, s);
      add_kernel(qnr, "qnr xi=" + format_double(xi) + " s=" + format_double(s));
    }
  }
  return rows;
}

/// P_MG and P_R between c = (1,...,1,2,3) and c' = (1,...,1,2,2) at K = 3,
/// alpha = (1,1,1), prior only.
struct SingletonMoveValues {
  std::size_t n = 0;
  double p_mg = 0.0;
  double p_r = 0.0;
};

inline SingletonMoveValues singleton_move_values(std::size_t n) {
  const auto model = ModelSpec::prior_only({1.0, 1.0, 1.0});
  const auto data = Dataset::prior_only(n);
  const auto mg = exact::build_kernel(exact::KernelKind::MG, model, data);
  const auto r = exact::build_kernel(exact::KernelKind::R, model, data);
  const auto [c, cp] = exact::singleton_move_pair(mg.space);
  return {n, mg.matrix.coeff(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(cp)),
          r.matrix.coeff(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(cp))};
}

/// The enumerated values against 2/(n(n+2)) for P_MG and the pair-move count
/// 1/(2n) for P_R (pair (2,3) w.p. 1/n, direction 1/2, acceptance 1).
inline std::vector<CheckRow> singleton_move_checks(std::size_t n) {
  const auto v = singleton_move_values(n);
  const double dn = static_cast<double>(n);
  const std::string inst = "K=3 n=" + std::to_string(n) + " alpha=(1,1,1)";
  return {at_most("singleton-move-mg", inst, std::abs(v.p_mg - 2.0 / (dn * (dn + 2.0))), 1e-12),
          at_most("singleton-move-r", inst, std::abs(v.p_r - 1.0 / (2.0 * dn)), 1e-12),
          at_most("singleton-move-ratio", inst, std::abs(v.p_mg / v.p_r - 4.0 / (dn + 2.0)), 1e-10)};
}

inline std::vector<CheckRow> eigenvalue_checks(const std::vector<std::size_t>& ns = {10, 20, 30}) {
  std::vector<CheckRow> rows;
  for (std::size_t n : ns) {
    for (const auto& [a1, a2] : std::vector<std::pair<double, double>>{{1.0, 1.0}, {2.0, 3.0}}) {
      const double A = a1 + a2;
      const double dn = static_cast<double>(n);
      const double closed = 1.0 - A / (dn * (dn + A - 1.0));
      rows.push_back(at_most("second-eigenvalue",
                             "n=" + std::to_string(n) + " alpha=" + format_vector({a1, a2}),
                             std::abs(exact::second_eigenvalue_lumped_mg(n, a1, a2) - closed), 1e-8));
    }
  }
  return rows;
}

/// Full battery over the grid: kernel checks with variance ordering, singleton-move
/// entries at n = 8 and the lumped-chain eigenvalues.
inline std::vector<CheckRow> exact_check_battery(const ExactGrid& grid) {
  std::vector<CheckRow> rows;
  bool first = true;
  for (const auto& inst : exact_instances(grid)) {
    auto part = exact_instance_checks(inst, grid, true, grid.perturb && first);
    first = false;
    rows.insert(rows.end(), part.begin(), part.end());
  }
  for (auto& r : singleton_move_checks(8)) rows.push_back(std::move(r));
  for (auto& r : eigenvalue_checks()) rows.push_back(std::move(r));
  return rows;
}

// ---------------------------------------------------------------------------
// Scaling-limit battery

/// Max |exact drift - closed form| over every grid point for n <= max_n.
inline std::vector<CheckRow> drift_checks(std::size_t max_n, std::size_t max_k) {
  std::vector<CheckRow> rows;
  for (std::size_t K = 2; K <= max_k; ++K) {
    auto alphas = grid_alphas(K);
    std::vector<double> mixed(K);
    for (std::size_t k = 0; k < K; ++k) mixed[k] = 0.3 + 0.7 * static_cast<double>(k);
    alphas.push_back(mixed);
    for (const auto& alpha : alphas) {
      double dev = 0.0;
      for (std::size_t n = 1; n <= max_n; ++n) {
        std::vector<std::size_t> counts(K, 0);
        // Enumerate compositions of n into K parts.
        std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t k, std::size_t left) {
          if (k + 1 == K) {
            counts[k] = left;
            const auto m = limits::mg_step_moments_exact(n, alpha, counts);
            limits::SimplexPoint x(K);
            for (std::size_t j = 0; j < K; ++j) x[j] = static_cast<double>(counts[j]) / static_cast<double>(n);
            const auto d = limits::mg_drift_closed_form(n, alpha, x);
            for (std::size_t j = 0; j < K; ++j) dev = std::max(dev, std::abs(m.drift[j] - d[j]));
            return;
          }
          for (std::size_t c = 0; c <= left; ++c) {
            counts[k] = c;
            rec(k + 1, left - c);
          }
        };
        rec(0, n);
      }
      rows.push_back(at_most("mg-drift", "K=" + std::to_string(K) + " n<=" + std::to_string(max_n) +
                                             " alpha=" + format_vector(alpha),
                             dev, 1e-13));
    }
  }
  return rows;
}

/// Residual r(n) = |(n^2/2) E[dX_1^2] - x_1(1 - x_1)| along doubling n; each
/// ratio r(n/2) / (2 r(n)) must lie in [0.6, 1.6].
inline std::vector<CheckRow> second_moment_checks(const std::vector<std::size_t>& ns = {40, 80, 160, 320}) {
  std::vector<CheckRow> rows;
  const std::vector<std::pair<std::vector<double>, limits::SimplexPoint>> cases{
      {{1.0, 1.0}, {0.25, 0.75}}, {{0.5, 2.0}, {0.25, 0.75}}, {{2.0, 1.0, 1.0}, {0.25, 0.25, 0.5}}};
  for (const auto& [alpha, x] : cases) {
    std::vector<double> resid;
    for (std::size_t n : ns) {
      const auto m = limits::mg_step_moments_exact(n, alpha, x);
      const double dn = static_cast<double>(n);
      resid.push_back(std::abs(0.5 * dn * dn * m.second(0, 0) - x[0] * (1.0 - x[0])));
    }
    for (std::size_t i = 0; i + 1 < ns.size(); ++i) {
      const double ratio = resid[i] / (2.0 * resid[i + 1]);
      CheckRow row{"mg-second-moment-rate",
                   "alpha=" + format_vector(alpha) + " x=" + format_vector(x) + " n=" + std::to_string(ns[i]) + "->" +
                       std::to_string(ns[i + 1]),
                   ratio, 1.6, ratio >= 0.6 && ratio <= 1.6};
      rows.push_back(row);
    }
  }
  return rows;
}

/// |n(1 - acc) - beta| at fixed x along doubling n, for every ordered pair.
/// Each step must shrink the deviation to at most 0.75 of the previous one;
/// a deviation that is exactly 0 at both ends also passes. At alpha = 1 the
/// deviation must be exactly 0.
inline std::vector<CheckRow> expansion_checks(const std::vector<std::size_t>& ns = {100, 200, 400, 800}) {
  std::vector<CheckRow> rows;
  const std::vector<std::pair<std::vector<double>, limits::SimplexPoint>> cases{
      {{2.0, 1.0}, {0.25, 0.75}}, {{0.5, 0.5}, {0.25, 0.75}}, {{3.0, 2.0, 1.0}, {0.25, 0.25, 0.5}}};
  for (const auto& [alpha, x] : cases) {
    const std::size_t K = alpha.size();
    for (std::size_t src = 0; src < K; ++src) {
      for (std::size_t tgt = 0; tgt < K; ++tgt) {
        if (src == tgt) continue;
        std::vector<double> dev;
        for (std::size_t n : ns) dev.push_back(limits::nr_acceptance_expansion_check(n, alpha, x, src, tgt));
        for (std::size_t i = 0; i + 1 < ns.size(); ++i) {
          const bool both_zero = dev[i] == 0.0 && dev[i + 1] == 0.0;
          const double ratio = both_zero ? 0.0 : dev[i + 1] / dev[i];
          rows.push_back({"nr-acceptance-expansion",
                          "alpha=" + format_vector(alpha) + " x=" + format_vector(x) + " " + std::to_string(src + 1) +
                              "->" + std::to_string(tgt + 1) + " n=" + std::to_string(ns[i]) + "->" +
                              std::to_string(ns[i + 1]),
                          ratio, 0.75, ratio <= 0.75});
        }
      }
    }
  }
  for (std::size_t K : {2u, 3u}) {
    limits::SimplexPoint x(K, 0.25);
    x.back() = 1.0 - 0.25 * static_cast<double>(K - 1);
    double dev = 0.0;
    for (std::size_t n : ns) dev = std::max(dev, limits::nr_acceptance_expansion_check(n, std::vector<double>(K, 1.0), x, 0, K - 1));
    rows.push_back({"nr-acceptance-unit-alpha", "K=" + std::to_string(K), dev, 0.0, dev == 0.0});
  }
  return rows;
}

struct RescaledResult {
  limits::RescaledTable table;
  CheckRow row;
};

/// W1 to the limit at the smallest and largest n: passes when the distance
/// drops by more than twice the noise floor, W1(n_small) - W1(n_large) > 2 * floor.
inline RescaledResult rescaled_check(const limits::RescaledComparison& cfg, const std::vector<std::size_t>& ns) {
  RescaledResult out;
  out.table = limits::rescaled_chain_vs_limit(cfg, ns);
  const double w_small = out.table.rows.front().distance;
  const double w_large = out.table.rows.back().distance;
  std::ostringstream inst;
  inst << to_string(cfg.kernel) << " R=" << cfg.replicates;
  for (const auto& r : out.table.rows) inst << " w1(n=" << r.n << ")=" << format_double(r.distance);
  inst << " floor=" << format_double(out.table.noise_floor);
  const double value = w_small - w_large;
  const double bound = 2.0 * out.table.noise_floor;
  out.row = {"rescaled-chain-vs-limit", inst.str(), value, bound, value > bound};
  return out;
}

/// Kolmogorov-Smirnov distance of Wright-Fisher endpoints (alpha = (1,1))
/// to Uniform(0,1).
inline CheckRow wright_fisher_stationary_check(std::size_t draws, double dt, double t_end, std::uint64_t seed,
                                               std::size_t threads, double bound) {
  std::vector<double> ends(draws);
  limits::WrightFisherOptions opt;
  opt.dt = dt;
  opt.t_end = t_end;
  parallel_for(draws, threads, [&](std::size_t r) {
    Rng gen(stream_seed(seed, r));
    ends[r] = limits::simulate_wright_fisher({1.0, 1.0}, {0.5, 0.5}, opt, gen).points.back()[0];
  });
  std::sort(ends.begin(), ends.end());
  const double m = static_cast<double>(draws);
  double d = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    d = std::max({d, static_cast<double>(i + 1) / m - ends[i], ends[i] - static_cast<double>(i) / m});
  }
  return at_most("wright-fisher-uniform", "draws=" + std::to_string(draws) + " dt=" + format_double(dt), d, bound);
}

}  // namespace liftmix::checks
