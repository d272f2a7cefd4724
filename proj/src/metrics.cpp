#include "kdisc/metrics.hpp"

#include "kdisc/errors.hpp"
#include "kdisc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace kdisc {
namespace {

std::vector<double> grid(double a, double b, std::size_t points) {
  if (points < 2) throw ConfigError("quadrature needs at least two points");
  if (!(b > a)) throw ConfigError("interval must satisfy a < b");
  std::vector<double> r(points);
  const double h = (b - a) / static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) r[k] = a + h * static_cast<double>(k);
  r.back() = b;
  return r;
}

double trapezoid(const std::vector<double>& v, double h) {
  double s = 0.0;
  for (double x : v) s += x;
  return h * (s - 0.5 * (v.front() + v.back()));
}

} // namespace

KernelErrors kernel_errors(const ScalarFn& truth, const ScalarFn& estimate, double a, double b,
                           std::size_t points) {
  const auto r = grid(a, b, points);
  std::vector<double> gap(points), ref(points);
  double gap_max = 0.0, ref_max = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    const double f = truth(r[k]);
    gap[k] = std::abs(f - estimate(r[k]));
    ref[k] = std::abs(f);
    gap_max = std::max(gap_max, gap[k]);
    ref_max = std::max(ref_max, ref[k]);
  }
  const double h = (b - a) / static_cast<double>(points - 1);
  const double ref_l1 = trapezoid(ref, h);
  if (ref_l1 == 0.0 || ref_max == 0.0) throw ConfigError("relative error undefined for a zero reference kernel");
  return {trapezoid(gap, h) / ref_l1, gap_max / ref_max};
}

double w1_sorted(std::span<const double> xa, std::span<const double> xb) {
  if (xa.size() != xb.size()) throw ConfigError("W1 needs samples of equal size");
  if (xa.empty()) throw ConfigError("W1 of empty samples");
  std::vector<double> a(xa.begin(), xa.end()), b(xb.begin(), xb.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double density_l1(const ParticleState& a, const ParticleState& b, const DensityBox& box) {
  const auto fa = estimate_density(a, box);
  const auto fb = estimate_density(b, box);
  double gap = 0.0, ref = 0.0;
  for (std::size_t m = 0; m < fa.cells(); ++m) {
    gap += std::abs(fa.values[m] - fb.values[m]);
    ref += fa.values[m];
  }
  return gap / ref;
}

TrajectoryErrors trajectory_errors(const TrajectoryDataset& data, const TrajectoryDataset& recon,
                                   const DensityBox& box) {
  if (data.snapshots() != recon.snapshots() || data.n_agents != recon.n_agents || data.dim != recon.dim ||
      data.dt != recon.dt)
    throw ConfigError("trajectory grids do not match");
  if (data.snapshots() < 2) throw ConfigError("trajectory errors need at least two snapshots");
  const std::size_t m = data.snapshots();
  TrajectoryErrors out;
  out.dim = data.dim;
  out.series.assign(m, 0.0);
  if (data.dim == 1) {
    parallel_for(m, [&](std::size_t n) { out.series[n] = w1_sorted(data.frames[n], recon.frames[n]); });
    double s = 0.0;
    for (std::size_t n = 1; n < m; ++n) s += out.series[n];
    out.aggregate = s / static_cast<double>(m - 1);
    out.final = out.series.back();
    return out;
  }
  std::vector<double> gaps(m), refs(m);
  parallel_for(m, [&](std::size_t n) {
    const auto fa = estimate_density(data.state(n), box);
    const auto fb = estimate_density(recon.state(n), box);
    const double vol = fa.cell_volume();
    double gap = 0.0, ref = 0.0;
    for (std::size_t c = 0; c < fa.cells(); ++c) {
      gap += std::abs(fa.values[c] - fb.values[c]) * vol;
      ref += fa.values[c] * vol;
    }
    gaps[n] = gap;
    refs[n] = ref;
    out.series[n] = gap / ref;
  });
  double gap_sum = 0.0, ref_sum = 0.0;
  for (std::size_t n = 1; n < m; ++n) {
    gap_sum += gaps[n];
    ref_sum += refs[n];
  }
  out.aggregate = gap_sum / ref_sum;
  out.final = out.series.back();
  return out;
}

void write_error_series_csv(std::ostream& out, const TrajectoryDataset& data, const TrajectoryErrors& errors) {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  out << "n,t," << (errors.dim == 1 ? "w1" : "l1_rel") << '\n';
  for (std::size_t n = 0; n < errors.series.size(); ++n) out << n << ',' << data.time(n) << ',' << errors.series[n] << '\n';
  out.precision(old);
}

double supremum_gap(const ScalarFn& truth, const ScalarFn& estimate, double a, double b, std::size_t points) {
  double gap = 0.0;
  for (double r : grid(a, b, points)) gap = std::max(gap, std::abs(truth(r) - estimate(r)));
  return gap;
}

double lipschitz_estimate(const ScalarFn& f, double a, double b, std::size_t points) {
  const auto r = grid(a, b, points);
  double lip = 0.0;
  double prev = f(r[0]);
  for (std::size_t k = 1; k < r.size(); ++k) {
    const double cur = f(r[k]);
    lip = std::max(lip, std::abs(cur - prev) / (r[k] - r[k - 1]));
    prev = cur;
  }
  return lip;
}

double supremum(const ScalarFn& f, double a, double b, std::size_t points) {
  double s = 0.0;
  for (double r : grid(a, b, points)) s = std::max(s, std::abs(f(r)));
  return s;
}

void BoundInputs::validate() const {
  const double fields[] = {lip_p, lip_d, lip_p_hat, lip_d_hat, p_max, p_hat_max, d_max, d_hat_max,
                           delta_p, delta_d, eta_s, box_radius, n_d, horizon, dt};
  for (double v : fields)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("bound inputs must be finite and nonnegative");
  if (eta_s > 2.0) throw ConfigError("pairing gap cannot exceed 2");
  if (dt > 1.0) throw ConfigError("theorem hypothesis violated: dt must not exceed 1");
}

BoundConstants bound_constants(const BoundInputs& in) {
  in.validate();
  const double l = in.box_radius, nd = in.n_d;
  BoundConstants k{};
  k.c1 = 8 * in.p_max * in.p_max + 64 * l * l * in.lip_p * in.lip_p + 4 * in.p_max + 4 * l * in.lip_p +
         8 * nd * in.lip_d * in.lip_d + 1;
  k.c2 = 18 * l * l * nd + 2 * nd;
  const double ph = in.p_hat_max, lph = in.lip_p_hat, ldh = in.lip_d_hat;
  k.c3 = 1 + 4 * ph + 2 * l * lph + 8 * nd * ldh * ldh + 8 * ph * ph + 64 * l * l * lph * lph * nd;
  k.c4 = (ph + 2 * l * lph) * (ph + 2 * l * lph) * nd + 2 * nd * nd * ldh * ldh * l * l + 4 * ph * ph * nd * l * l +
         16 * l * l * l * l * lph * lph * nd * nd;
  k.c1_hat = std::max(k.c1, k.c3);
  k.c2_hat = std::max(k.c2 / k.c1, k.c4 / k.c3);
  return k;
}

double apriori_bound(const BoundInputs& inputs) {
  const auto k = bound_constants(inputs);
  const double gaps = inputs.delta_p * inputs.delta_p + inputs.delta_d * inputs.delta_d + inputs.eta_s * inputs.eta_s;
  if (gaps == 0.0 || inputs.horizon == 0.0) return 0.0;
  return gaps * k.c2_hat * std::expm1(k.c1_hat * inputs.horizon);
}

TheoremCheckResult theorem_check(const TheoremCheckConfig& config) {
  if (config.paths < 1) throw ConfigError("theorem check needs at least one path");
  if (!config.drift || !config.diffusion) throw ConfigError("theorem check needs drift and diffusion kernels");
  KernelSpec truth{config.drift, DiffusionMode::pairwise_radial, config.diffusion, {}};
  const double eps = config.perturbation;
  const ScalarFn p = config.drift;
  KernelSpec perturbed{[p, eps](double r) { return p(r) + eps; }, DiffusionMode::pairwise_radial,
                       config.diffusion, {}};

  const RandomStream root(config.seed);
  std::vector<std::vector<double>> sq(config.paths, std::vector<double>(config.snapshots, 0.0));
  std::vector<double> radius(config.paths, 0.0);
  parallel_for(config.paths, [&](std::size_t path) {
    SimConfig sim;
    sim.n_agents = config.n_agents;
    sim.dim = 1;
    sim.dt = config.dt;
    sim.snapshots = config.snapshots;
    sim.seed = root.substream(path).key();
    const auto a = simulate(sim, truth, Scheme::binary);
    const auto b = simulate(sim, perturbed, Scheme::binary);
    for (std::size_t n = 0; n < config.snapshots; ++n) {
      double s = 0.0;
      for (std::size_t i = 0; i < config.n_agents; ++i) {
        const double e = a.frames[n][i] - b.frames[n][i];
        s += e * e;
        radius[path] = std::max({radius[path], std::abs(a.frames[n][i]), std::abs(b.frames[n][i])});
      }
      sq[path][n] = s;
    }
  });

  TheoremCheckResult result;
  for (std::size_t n = 0; n < config.snapshots; ++n) {
    double mean = 0.0;
    for (std::size_t path = 0; path < config.paths; ++path) mean += sq[path][n];
    result.empirical = std::max(result.empirical, mean / static_cast<double>(config.paths));
  }

  BoundInputs& in = result.inputs;
  in.box_radius = *std::max_element(radius.begin(), radius.end());
  const double reach = std::max(2.0 * in.box_radius, 1e-12);
  const ScalarFn p_hat = perturbed.drift;
  in.lip_p = lipschitz_estimate(p, 0.0, reach);
  in.lip_p_hat = lipschitz_estimate(p_hat, 0.0, reach);
  in.lip_d = in.lip_d_hat = lipschitz_estimate(config.diffusion, 0.0, reach);
  in.p_max = supremum(p, 0.0, reach);
  in.p_hat_max = supremum(p_hat, 0.0, reach);
  in.d_max = in.d_hat_max = supremum(config.diffusion, 0.0, reach);
  in.delta_p = supremum_gap(p, p_hat, 0.0, reach);
  in.n_d = static_cast<double>(config.n_agents);
  in.horizon = static_cast<double>(config.snapshots - 1) * config.dt;
  in.dt = config.dt;
  result.bound = apriori_bound(in);
  return result;
}

} // namespace kdisc
