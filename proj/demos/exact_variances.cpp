// Exact asymptotic variances of the registered functionals under P_MG, P_R
// and P_NR on one small prior-only instance.
//
//   demo_exact_variances [n] [K] [alpha]

#include <cstdio>
#include <cstdlib>

#include "liftmix/exact_oracle.hpp"

using namespace liftmix;

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 5;
  const std::size_t K = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 3;
  const double a = argc > 3 ? std::strtod(argv[3], nullptr) : 1.0;
  const auto model = ModelSpec::prior_only(std::vector<double>(K, a));
  const auto data = Dataset::prior_only(n);

  const auto mg = exact::build_kernel(exact::KernelKind::MG, model, data);
  const auto r = exact::build_kernel(exact::KernelKind::R, model, data);
  const auto nr = exact::build_kernel(exact::KernelKind::NR, model, data, 0.5);
  std::printf("n=%zu K=%zu alpha=%g: %zu allocations, %zu lifted states\n", n, K, a, mg.size(), nr.size());
  std::printf("%-20s %12s %12s %12s %12s\n", "functional", "Var_pi", "MG", "R", "NR");
  for (const auto& [name, g] : exact::test_functionals(K)) {
    const auto values = exact::evaluate(mg.space, g);
    std::printf("%-20s %12.6f %12.6f %12.6f %12.6f\n", name.c_str(), exact::stationary_variance(mg, values),
                exact::asymptotic_variance_exact(mg, values), exact::asymptotic_variance_exact(r, values),
                exact::asymptotic_variance_exact(nr, exact::evaluate(nr.space, g)));
  }
  return 0;
}
