#include "kdisc/qp.hpp"

#include "kdisc/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace kdisc {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

struct ActiveSetOutcome {
  VectorXd z;
  std::vector<std::size_t> working;  // ascending constraint indices
  VectorXd lambda;                   // aligned with `working`
  std::size_t iterations = 0;
  bool converged = false;
};

double reference_scale(const MatrixXd& h, const VectorXd& g, const VectorXd& z) {
  const double zmax = z.size() > 0 ? std::max(z.lpNorm<Eigen::Infinity>(), 1.0) : 1.0;
  const double hmax = h.size() > 0 ? h.cwiseAbs().maxCoeff() : 0.0;
  const double gmax = g.size() > 0 ? g.lpNorm<Eigen::Infinity>() : 0.0;
  const double s = std::max(hmax * zmax, gmax);
  return s > 0.0 ? s : 1.0;
}

// Primal active set for min 1/2 z'Hz - g'z s.t. Cz <= h, from a feasible z.
// H must be positive definite. Removal and blocking ties follow Bland's rule.
ActiveSetOutcome active_set(const MatrixXd& hess, const VectorXd& g, const MatrixXd& c,
                            const VectorXd& h, VectorXd z, std::size_t max_iter) {
  const auto f = static_cast<Eigen::Index>(z.size());
  const auto m = static_cast<std::size_t>(c.rows());
  const double scale = reference_scale(hess, g, z);
  const double lambda_tol = 1e-11 * scale;

  ActiveSetOutcome out;
  std::vector<std::size_t>& w = out.working;
  std::vector<char> in_w(m, 0);
  bool at_subspace_min = false;

  for (std::size_t it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    const auto nw = static_cast<Eigen::Index>(w.size());
    MatrixXd kkt = MatrixXd::Zero(f + nw, f + nw);
    kkt.topLeftCorner(f, f) = hess;
    for (Eigen::Index j = 0; j < nw; ++j) {
      kkt.block(f + j, 0, 1, f) = c.row(static_cast<Eigen::Index>(w[j]));
      kkt.block(0, f + j, f, 1) = c.row(static_cast<Eigen::Index>(w[j])).transpose();
    }
    VectorXd rhs = VectorXd::Zero(f + nw);
    rhs.head(f) = g - hess * z;
    const VectorXd sol = kkt.fullPivLu().solve(rhs);
    const VectorXd p = sol.head(f);
    out.lambda = sol.tail(nw);

    const double zscale = std::max(z.lpNorm<Eigen::Infinity>(), 1.0);
    if (at_subspace_min || p.lpNorm<Eigen::Infinity>() <= 1e-14 * zscale) {
      std::size_t drop = npos;
      for (Eigen::Index j = 0; j < nw; ++j) {
        if (out.lambda[j] < -lambda_tol) {
          drop = static_cast<std::size_t>(j);
          break;
        }
      }
      if (drop == npos) {
        out.converged = true;
        out.z = std::move(z);
        return out;
      }
      in_w[w[drop]] = 0;
      w.erase(w.begin() + static_cast<std::ptrdiff_t>(drop));
      at_subspace_min = false;
      continue;
    }

    const double pnorm = p.lpNorm<Eigen::Infinity>();
    double alpha = 1.0;
    std::size_t block = npos;
    for (std::size_t i = 0; i < m; ++i) {
      if (in_w[i]) continue;
      const auto row = c.row(static_cast<Eigen::Index>(i));
      const double cp = row.dot(p);
      if (cp <= 1e-14 * row.lpNorm<1>() * pnorm) continue;
      const double slack = std::max(h[static_cast<Eigen::Index>(i)] - row.dot(z), 0.0);
      const double a = slack / cp;
      if (a < alpha || (a == alpha && block == npos)) {
        alpha = a;
        block = i;
      }
    }
    z += alpha * p;
    if (block != npos) {
      in_w[block] = 1;
      w.insert(std::upper_bound(w.begin(), w.end(), block), block);
      at_subspace_min = false;
    } else {
      at_subspace_min = true;
    }
  }
  out.z = std::move(z);
  return out;
}

// Feasible point heuristic: interpolate linearly between anchors, extend with
// constants, clamp sign-constrained entries. Feasible whenever the anchors are
// compatible with the sign and chain rows.
VectorXd heuristic_start(const ConstraintSet& cs, std::size_t n) {
  VectorXd theta = VectorXd::Zero(static_cast<Eigen::Index>(n));
  auto anchors = cs.anchors;
  std::sort(anchors.begin(), anchors.end());
  if (!anchors.empty()) {
    for (std::size_t k = 0; k < n; ++k) {
      double v;
      if (k <= anchors.front().first) {
        v = anchors.front().second;
      } else if (k >= anchors.back().first) {
        v = anchors.back().second;
      } else {
        auto hi = std::lower_bound(anchors.begin(), anchors.end(), std::make_pair(k, -HUGE_VAL));
        auto lo = hi - 1;
        const double t = static_cast<double>(k - lo->first) / static_cast<double>(hi->first - lo->first);
        v = (1.0 - t) * lo->second + t * hi->second;
      }
      theta[static_cast<Eigen::Index>(k)] = v;
    }
  }
  if (!cs.sign.empty())
    for (std::size_t k = 0; k < n; ++k)
      if (cs.sign[k] == Sign::nonneg) theta[static_cast<Eigen::Index>(k)] = std::max(theta[static_cast<Eigen::Index>(k)], 0.0);
  for (const auto& [k, v] : cs.anchors) theta[static_cast<Eigen::Index>(k)] = v;
  return theta;
}

double max_violation(const MatrixXd& c, const VectorXd& h, const VectorXd& z, std::size_t* argmax) {
  double worst = -HUGE_VAL;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    const double v = c.row(i).dot(z) - h[i];
    if (v > worst) {
      worst = v;
      if (argmax) *argmax = static_cast<std::size_t>(i);
    }
  }
  return worst;
}

} // namespace

void ConstraintSet::validate(std::size_t n) const {
  if (n == 0) throw ConfigError("constraint set needs at least one coefficient");
  if (!sign.empty() && sign.size() != n)
    throw ConfigError("sign vector length " + std::to_string(sign.size()) + " does not match " +
                      std::to_string(n) + " coefficients");
  if (monotonicity < -1 || monotonicity > 1) throw ConfigError("monotonicity must be -1, 0 or +1");
  std::set<std::size_t> seen;
  for (const auto& [k, v] : anchors) {
    if (k >= n) throw ConfigError("anchor index " + std::to_string(k) + " out of range");
    if (!seen.insert(k).second) throw ConfigError("duplicate anchor index " + std::to_string(k));
    if (!std::isfinite(v)) throw ConfigError("anchor value must be finite");
  }
}

ConstraintSet build_constraints_for_drift(std::size_t n_basis, std::optional<double> anchor_at_zero,
                                          int monotonicity) {
  ConstraintSet cs;
  if (anchor_at_zero) cs.anchors.emplace_back(0, *anchor_at_zero);
  cs.monotonicity = monotonicity;
  cs.validate(n_basis);
  return cs;
}

ConstraintSet build_constraints_for_diffusion(std::size_t n_basis,
                                              std::vector<std::pair<std::size_t, double>> anchors,
                                              int monotonicity) {
  ConstraintSet cs;
  cs.anchors = std::move(anchors);
  cs.sign.assign(n_basis, Sign::nonneg);
  cs.monotonicity = monotonicity;
  cs.validate(n_basis);
  return cs;
}

std::vector<InequalityRow> inequality_rows(const ConstraintSet& constraints, std::size_t n) {
  std::vector<InequalityRow> rows;
  if (!constraints.sign.empty())
    for (std::size_t k = 0; k < n; ++k)
      if (constraints.sign[k] == Sign::nonneg) rows.push_back({k, -1.0, std::nullopt, 0.0});
  if (constraints.monotonicity != 0) {
    const double kappa = constraints.monotonicity;
    for (std::size_t k = 0; k + 1 < n; ++k) rows.push_back({k, kappa, k + 1, -kappa});
  }
  return rows;
}

NormalEquations NormalEquations::zeros(std::size_t n) {
  NormalEquations ne;
  const auto m = static_cast<Eigen::Index>(n);
  ne.gram = MatrixXd::Zero(m, m);
  ne.rhs = VectorXd::Zero(m);
  return ne;
}

NormalEquations NormalEquations::from(const RowMatrix& a, const VectorXd& y) {
  if (a.rows() != y.size()) throw ConfigError("design rows do not match target length");
  NormalEquations ne = zeros(static_cast<std::size_t>(a.cols()));
  ne.gram.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  ne.gram = ne.gram.selfadjointView<Eigen::Lower>();
  ne.rhs = a.transpose() * y;
  ne.yty = y.squaredNorm();
  ne.rows = static_cast<std::size_t>(a.rows());
  return ne;
}

NormalEquations& NormalEquations::accumulate(const NormalEquations& other, double weight) {
  if (other.gram.rows() != gram.rows()) throw ConfigError("normal equations of different sizes");
  gram += weight * other.gram;
  rhs += weight * other.rhs;
  yty += weight * other.yty;
  rows += other.rows;
  return *this;
}

double NormalEquations::objective(const VectorXd& theta) const {
  return theta.dot(gram * theta) - 2.0 * rhs.dot(theta) + yty;
}

std::string_view to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::max_iter: return "max_iter";
    case QpStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

QpSolution solve_cls(const NormalEquations& normal, const ConstraintSet& constraints,
                     const QpOptions& options) {
  const auto n = static_cast<std::size_t>(normal.gram.rows());
  if (normal.gram.cols() != normal.gram.rows() || normal.rhs.size() != normal.gram.rows())
    throw ConfigError("malformed normal equations");
  constraints.validate(n);
  if (!normal.gram.allFinite() || !normal.rhs.allFinite())
    throw NumericError("non-finite entries in the least-squares system");

  const auto rows = inequality_rows(constraints, n);
  VectorXd theta = heuristic_start(constraints, n);

  std::vector<char> fixed(n, 0);
  for (const auto& [k, v] : constraints.anchors) fixed[k] = 1;
  std::vector<Eigen::Index> free_idx, pos(n, -1);
  for (std::size_t k = 0; k < n; ++k)
    if (!fixed[k]) {
      pos[k] = static_cast<Eigen::Index>(free_idx.size());
      free_idx.push_back(static_cast<Eigen::Index>(k));
    }
  const auto f = static_cast<Eigen::Index>(free_idx.size());

  QpSolution sol;
  const double tol_c = options.constraint_tol;

  // Reduced rows C z <= h; rows touching only anchored entries are checked now.
  std::vector<std::size_t> row_of;
  MatrixXd c(0, f);
  VectorXd h(0);
  {
    std::vector<VectorXd> crow;
    std::vector<double> hval;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      VectorXd cr = VectorXd::Zero(f);
      double rhs = 0.0;
      auto add = [&](std::size_t k, double coeff) {
        if (fixed[k]) rhs -= coeff * theta[static_cast<Eigen::Index>(k)];
        else cr[pos[k]] += coeff;
      };
      add(rows[r].first, rows[r].first_coeff);
      if (rows[r].second) add(*rows[r].second, rows[r].second_coeff);
      if (cr.isZero(0.0)) {
        if (rhs < -tol_c && !sol.certificate_row) sol.certificate_row = r;
        continue;
      }
      crow.push_back(std::move(cr));
      hval.push_back(rhs);
      row_of.push_back(r);
    }
    c.resize(static_cast<Eigen::Index>(crow.size()), f);
    h.resize(static_cast<Eigen::Index>(crow.size()));
    for (std::size_t i = 0; i < crow.size(); ++i) {
      c.row(static_cast<Eigen::Index>(i)) = crow[i].transpose();
      h[static_cast<Eigen::Index>(i)] = hval[i];
    }
  }
  auto finish_theta = [&](const VectorXd& z) {
    for (Eigen::Index j = 0; j < f; ++j) theta[free_idx[static_cast<std::size_t>(j)]] = z[j];
  };
  auto collect_active = [&]() {
    sol.active.clear();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      double v = rows[r].first_coeff * theta[static_cast<Eigen::Index>(rows[r].first)];
      if (rows[r].second) v += rows[r].second_coeff * theta[static_cast<Eigen::Index>(*rows[r].second)];
      if (std::abs(v) <= tol_c) sol.active.push_back(r);
    }
  };

  if (sol.certificate_row) {
    sol.status = QpStatus::infeasible;
    sol.theta = theta;
    sol.objective = std::max(normal.objective(theta), 0.0);
    return sol;
  }

  if (f == 0) {
    sol.theta = theta;
    sol.objective = std::max(normal.objective(theta), 0.0);
    collect_active();
    return sol;
  }

  MatrixXd hess(f, f);
  VectorXd g(f);
  for (Eigen::Index a = 0; a < f; ++a) {
    const auto ka = free_idx[static_cast<std::size_t>(a)];
    g[a] = normal.rhs[ka];
    for (Eigen::Index b = 0; b < f; ++b) hess(a, b) = normal.gram(ka, free_idx[static_cast<std::size_t>(b)]);
    for (const auto& [k, v] : constraints.anchors) g[a] -= normal.gram(ka, static_cast<Eigen::Index>(k)) * v;
  }

  // Cholesky with a relative pivot test; a shifted diagonal on failure.
  {
    Eigen::LLT<MatrixXd> llt(hess);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
      const auto diag = llt.matrixL().toDenseMatrix().diagonal();
      const double dmax = hess.diagonal().cwiseAbs().maxCoeff();
      ok = diag.minCoeff() * diag.minCoeff() > 1e-14 * dmax;
    }
    if (!ok) {
      const double tr = hess.trace();
      const double shift = tr > 0.0 ? 1e-12 * tr / static_cast<double>(f) : 1.0;
      hess.diagonal().array() += shift;
      sol.regularized = true;
    }
  }

  const std::size_t max_iter = options.max_iterations ? options.max_iterations : 200 * std::max<std::size_t>(n, 1);
  VectorXd z0(f);
  for (Eigen::Index j = 0; j < f; ++j) z0[j] = theta[free_idx[static_cast<std::size_t>(j)]];

  if (c.rows() > 0 && max_violation(c, h, z0, nullptr) > tol_c) {
    // Phase 1: min eps/2 |z|^2 + 1/2 |s|^2 s.t. Cz - s <= h, s >= 0.
    const Eigen::Index m = c.rows();
    MatrixXd h1 = MatrixXd::Zero(f + m, f + m);
    h1.topLeftCorner(f, f).diagonal().setConstant(1e-12);
    h1.bottomRightCorner(m, m).diagonal().setOnes();
    MatrixXd c1 = MatrixXd::Zero(2 * m, f + m);
    c1.topLeftCorner(m, f) = c;
    c1.topRightCorner(m, m).diagonal().setConstant(-1.0);
    c1.bottomRightCorner(m, m).diagonal().setConstant(-1.0);
    VectorXd rhs1 = VectorXd::Zero(2 * m);
    rhs1.head(m) = h;
    VectorXd start = VectorXd::Zero(f + m);
    start.tail(m) = (-h).cwiseMax(0.0);
    const auto phase1 = active_set(h1, VectorXd::Zero(f + m), c1, rhs1, start, 200 * static_cast<std::size_t>(f + m));
    z0 = phase1.z.head(f);
    std::size_t worst = 0;
    if (max_violation(c, h, z0, &worst) > tol_c) {
      finish_theta(z0);
      sol.status = QpStatus::infeasible;
      sol.certificate_row = row_of[worst];
      sol.theta = theta;
      sol.objective = std::max(normal.objective(theta), 0.0);
      sol.iterations = phase1.iterations;
      return sol;
    }
  }

  const auto outcome = active_set(hess, g, c, h, z0, max_iter);
  finish_theta(outcome.z);
  sol.theta = theta;
  sol.iterations = outcome.iterations;
  sol.status = outcome.converged ? QpStatus::optimal : QpStatus::max_iter;
  sol.objective = std::max(normal.objective(theta), 0.0);

  const double scale = reference_scale(hess, g, outcome.z);
  VectorXd station = hess * outcome.z - g;
  double kkt = 0.0;
  for (std::size_t j = 0; j < outcome.working.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(outcome.working[j]);
    const double lam = outcome.lambda[static_cast<Eigen::Index>(j)];
    station += lam * c.row(i).transpose();
    kkt = std::max(kkt, std::max(-lam, 0.0) / scale);
    kkt = std::max(kkt, std::abs(lam * (c.row(i).dot(outcome.z) - h[i])) / scale);
  }
  kkt = std::max(kkt, station.lpNorm<Eigen::Infinity>() / scale);
  if (c.rows() > 0) kkt = std::max(kkt, std::max(max_violation(c, h, outcome.z, nullptr), 0.0));
  sol.kkt_residual = kkt;
  collect_active();
  return sol;
}

QpSolution solve_cls(const RowMatrix& a, const VectorXd& y, const ConstraintSet& constraints,
                     const QpOptions& options) {
  auto sol = solve_cls(NormalEquations::from(a, y), constraints, options);
  sol.objective = (a * sol.theta - y).squaredNorm();
  return sol;
}

} // namespace kdisc
