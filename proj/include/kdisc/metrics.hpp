#pragma once

#include "kdisc/design.hpp"
#include "kdisc/dynamics.hpp"
#include "kdisc/kernels.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace kdisc {

struct KernelErrors {
  double l1 = 0.0;    // E^1, trapezoid rule
  double linf = 0.0;  // E^inf on the same grid
};

// Relative L1 / Linf errors of `estimate` against `truth` on [a, b], sampled on
// `points` equispaced nodes.
KernelErrors kernel_errors(const ScalarFn& truth, const ScalarFn& estimate, double a, double b,
                           std::size_t points = 2001);

// 1-Wasserstein distance of two equal-size 1D samples: mean gap of the sorted values.
double w1_sorted(std::span<const double> xa, std::span<const double> xb);

// Relative L1 distance of the two normalized histograms on the box.
double density_l1(const ParticleState& a, const ParticleState& b, const DensityBox& box);

// d = 1: aggregate = mean of W1 over n = 1..M-1, final = W1 at n = M-1.
// d = 2: aggregate = sum_n ||f^n - f_hat^n||_1 / sum_n ||f^n||_1 over the same
//        range, final = the relative gap at n = M-1, both on histograms over `box`.
// `series` holds the per-snapshot distance for n = 0..M-1.
struct TrajectoryErrors {
  int dim = 1;
  double aggregate = 0.0;
  double final = 0.0;
  std::vector<double> series;
};

TrajectoryErrors trajectory_errors(const TrajectoryDataset& data, const TrajectoryDataset& recon,
                                   const DensityBox& box = {-1.0, 1.0, 50});

void write_error_series_csv(std::ostream& out, const TrajectoryDataset& data, const TrajectoryErrors& errors);

// sup over the grid of |F - F_hat|.
double supremum_gap(const ScalarFn& truth, const ScalarFn& estimate, double a, double b,
                    std::size_t points = 2001);
// Largest divided difference between adjacent grid points; a lower bound on
// the Lipschitz constant.
double lipschitz_estimate(const ScalarFn& f, double a, double b, std::size_t points = 2001);
// sup over the grid of |F|.
double supremum(const ScalarFn& f, double a, double b, std::size_t points = 2001);

struct BoundInputs {
  double lip_p = 0.0, lip_d = 0.0, lip_p_hat = 0.0, lip_d_hat = 0.0;
  double p_max = 0.0, p_hat_max = 0.0, d_max = 0.0, d_hat_max = 0.0;
  double delta_p = 0.0, delta_d = 0.0, eta_s = 0.0;
  double box_radius = 0.0;  // L
  double n_d = 0.0;         // d * N
  double horizon = 0.0;     // T
  double dt = 0.0;

  void validate() const;
};

struct BoundConstants {
  double c1, c2, c3, c4, c1_hat, c2_hat;
};

BoundConstants bound_constants(const BoundInputs& inputs);

// (delta_P^2 + delta_D^2 + eta_S^2) * C2_hat * (exp(C1_hat T) - 1)
double apriori_bound(const BoundInputs& inputs);

// Monte Carlo check of the mean-square trajectory bound: true kernels against
// P_hat = P + perturbation, same pairings and same Gaussians in both runs.
struct TheoremCheckConfig {
  std::size_t n_agents = 10;
  std::size_t snapshots = 51;
  double dt = 0.01;
  std::size_t paths = 1000;
  std::uint64_t seed = 7;
  ScalarFn drift;      // P
  ScalarFn diffusion;  // D(r), pairwise_radial mode
  double perturbation = 0.01;
};

struct TheoremCheckResult {
  double empirical = 0.0;  // max_n mean over paths of ||X^n - X_hat^n||^2
  double bound = 0.0;
  BoundInputs inputs;
  [[nodiscard]] bool holds() const { return empirical <= bound; }
};

TheoremCheckResult theorem_check(const TheoremCheckConfig& config);

} // namespace kdisc
