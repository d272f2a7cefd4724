#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include "kdisc/errors.hpp"
#include "kdisc/metrics.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace kdisc;

TEST_SUITE("metrics") {

TEST_CASE("kernel errors of a constant offset") {
  const auto e = kernel_errors(kernels::constant(1.0), kernels::constant(1.1), 0.0, 2.0);
  CHECK(e.l1 == doctest::Approx(0.1));
  CHECK(e.linf == doctest::Approx(0.1));
  const auto z = kernel_errors(kernels::cucker_smale(), kernels::cucker_smale(), 0.0, 2.0);
  CHECK(z.l1 == 0.0);
  CHECK(z.linf == 0.0);
}

TEST_CASE("kernel errors against a fine quadrature") {
  const auto truth = kernels::cucker_smale();
  std::vector<double> nodes, values;
  for (int k = 0; k < 10; ++k) {
    nodes.push_back(2.0 * k / 9.0);
    values.push_back(truth(nodes.back()));
  }
  const auto interp = kernels::piecewise_linear(nodes, values);
  // Midpoint rule with 10^6 cells as the oracle.
  const int cells = 1000000;
  double gap = 0.0, ref = 0.0;
  for (int m = 0; m < cells; ++m) {
    const double r = 2.0 * (m + 0.5) / cells;
    gap += std::abs(truth(r) - interp(r));
    ref += std::abs(truth(r));
  }
  CHECK(kernel_errors(truth, interp, 0.0, 2.0).l1 == doctest::Approx(gap / ref).epsilon(1e-4));
}

TEST_CASE("kernel errors are scale invariant and need a nonzero reference") {
  const auto a = kernel_errors(kernels::cucker_smale(), kernels::pair_decay(), 0.0, 2.0);
  const auto b = kernel_errors([](double r) { return 7.0 * kernels::cucker_smale()(r); },
                               [](double r) { return 7.0 * kernels::pair_decay()(r); }, 0.0, 2.0);
  CHECK(a.l1 == doctest::Approx(b.l1));
  CHECK(a.linf == doctest::Approx(b.linf));
  CHECK_THROWS_WITH_AS(kernel_errors(kernels::constant(0.0), kernels::constant(1.0), 0.0, 2.0),
                       doctest::Contains("relative error undefined"), ConfigError);
  CHECK_THROWS_AS(kernel_errors(kernels::constant(1.0), kernels::constant(1.0), 0.0, 2.0, 1), ConfigError);
}

TEST_CASE("W1 ignores labels") {
  const std::vector<double> a{0.0, 1.0}, b{1.0, 0.0};
  CHECK(w1_sorted(a, b) == 0.0);
  CHECK(w1_sorted(a, a) == 0.0);
  CHECK_THROWS_AS(w1_sorted(a, std::vector<double>{1.0}), ConfigError);
}

TEST_CASE("W1 equals the assignment oracle") {
  SplitMix64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> size(1, 7);
  for (int t = 0; t < 50; ++t) {
    const int n = size(rng);
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    CHECK(w1_sorted(a, b) == doctest::Approx(oracle::w1_bruteforce(a, b)).epsilon(1e-14));
  }
}

TEST_CASE("W1 is a metric on random triples") {
  SplitMix64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(30), b(30), c(30);
    for (auto* v : {&a, &b, &c})
      for (auto& x : *v) x = u(rng);
    CHECK(w1_sorted(a, b) == w1_sorted(b, a));
    CHECK(w1_sorted(a, c) <= w1_sorted(a, b) + w1_sorted(b, c) + 1e-15);
  }
}

TEST_CASE("trajectory errors vanish on identical data") {
  for (int dim : {1, 2}) {
    const auto data = fixture::random_dataset(20, dim, 5, 3);
    const auto e = trajectory_errors(data, data);
    CHECK(e.dim == dim);
    CHECK(e.aggregate == 0.0);
    CHECK(e.final == 0.0);
    CHECK(e.series.size() == 5);
  }
}

TEST_CASE("trajectory errors in 1D are W1 per snapshot") {
  const auto data = fixture::random_dataset(15, 1, 4, 3);
  const auto other = fixture::random_dataset(15, 1, 4, 4);
  const auto e = trajectory_errors(data, other);
  double mean = 0.0;
  for (std::size_t n = 1; n < 4; ++n) {
    const double w = w1_sorted(data.frames[n], other.frames[n]);
    CHECK(e.series[n] == doctest::Approx(w));
    mean += w / 3.0;
  }
  CHECK(e.aggregate == doctest::Approx(mean));
  CHECK(e.final == doctest::Approx(e.series[3]));
  auto shorter = other;
  shorter.frames.pop_back();
  CHECK_THROWS_AS(trajectory_errors(data, shorter), ConfigError);
}

TEST_CASE("error series csv has one row per snapshot") {
  const auto data = fixture::random_dataset(4, 1, 3, 3);
  std::ostringstream out;
  write_error_series_csv(out, data, trajectory_errors(data, data));
  const std::string text = out.str();
  CHECK(text.rfind("n,t,w1\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}

TEST_CASE("grid Lipschitz and supremum estimates") {
  CHECK(lipschitz_estimate([](double r) { return 3.0 * r - 1.0; }, 0.0, 2.0, 7) == doctest::Approx(3.0));
  // |F'| of (1+r^2)^-2 peaks at r = 1/sqrt(5).
  const double r0 = 1.0 / std::sqrt(5.0);
  const double peak = 4.0 * r0 / std::pow(1.0 + r0 * r0, 3);
  CHECK(lipschitz_estimate(kernels::cucker_smale(), 0.0, 2.0, 100000) == doctest::Approx(peak).epsilon(1e-6));
  CHECK(supremum_gap(kernels::cucker_smale(), kernels::cucker_smale(), 0.0, 2.0) == 0.0);
  CHECK(supremum(kernels::pair_decay(), 0.0, 2.0) == doctest::Approx(0.25));
}

TEST_CASE("a priori bound edge cases and monotonicity") {
  BoundInputs in;
  in.lip_p = in.lip_p_hat = 1.0;
  in.lip_d = in.lip_d_hat = 0.5;
  in.p_max = in.p_hat_max = 1.0;
  in.d_max = in.d_hat_max = 0.25;
  in.box_radius = 1.0;
  in.n_d = 10;
  in.horizon = 0.5;
  in.dt = 0.01;
  CHECK(apriori_bound(in) == 0.0);
  in.delta_p = 0.01;
  const double base = apriori_bound(in);
  CHECK(base > 0.0);
  auto bumped = in;
  bumped.delta_d = 0.01;
  CHECK(apriori_bound(bumped) >= base);
  bumped = in;
  bumped.eta_s = 0.1;
  CHECK(apriori_bound(bumped) >= base);
  bumped = in;
  bumped.horizon = 1.0;
  CHECK(apriori_bound(bumped) >= base);
  bumped = in;
  bumped.horizon = 0.0;
  CHECK(apriori_bound(bumped) == 0.0);
  bumped = in;
  bumped.dt = 1.5;
  CHECK_THROWS_WITH_AS(apriori_bound(bumped), doctest::Contains("theorem hypothesis violated"), ConfigError);
}

TEST_CASE("bound constants by hand") {
  BoundInputs in;
  in.lip_p = 2.0;
  in.lip_d = 1.0;
  in.p_max = 1.0;
  in.box_radius = 1.0;
  in.n_d = 2.0;
  in.dt = 0.1;
  const auto k = bound_constants(in);
  CHECK(k.c1 == doctest::Approx(8 + 64 * 4 + 4 + 8 + 16 + 1));
  CHECK(k.c2 == doctest::Approx(18 * 2 + 4));
  CHECK(k.c3 == doctest::Approx(1.0));
  CHECK(k.c1_hat == doctest::Approx(k.c1));
}

TEST_CASE("theorem check with zero perturbation is exact") {
  TheoremCheckConfig cfg;
  cfg.paths = 20;
  cfg.snapshots = 11;
  cfg.drift = kernels::cucker_smale();
  cfg.diffusion = kernels::pair_decay();
  cfg.perturbation = 0.0;
  const auto r = theorem_check(cfg);
  CHECK(r.empirical <= 1e-20);
  CHECK(r.holds());
}

}
