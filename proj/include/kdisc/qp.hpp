#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace kdisc {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Sign { free, nonneg };

// Polyhedral coefficient set: equality anchors theta_i = v, per-entry sign
// constraints and an optional monotone chain kappa*theta_k <= kappa*theta_{k+1}.
struct ConstraintSet {
  std::vector<std::pair<std::size_t, double>> anchors;
  std::vector<Sign> sign;  // empty means all free
  int monotonicity = 0;    // -1, 0 or +1

  void validate(std::size_t n) const;
};

ConstraintSet build_constraints_for_drift(std::size_t n_basis, std::optional<double> anchor_at_zero,
                                          int monotonicity);
ConstraintSet build_constraints_for_diffusion(std::size_t n_basis,
                                              std::vector<std::pair<std::size_t, double>> anchors,
                                              int monotonicity);

// A^T A, A^T y and y^T y of a least-squares problem. Weighted stacking of row
// blocks sqrt(w) * [A | y] corresponds to accumulate(other, w).
struct NormalEquations {
  Eigen::MatrixXd gram;
  Eigen::VectorXd rhs;
  double yty = 0.0;
  std::size_t rows = 0;

  static NormalEquations zeros(std::size_t n);
  static NormalEquations from(const RowMatrix& a, const Eigen::VectorXd& y);
  NormalEquations& accumulate(const NormalEquations& other, double weight);
  [[nodiscard]] double objective(const Eigen::VectorXd& theta) const;
};

struct QpOptions {
  double constraint_tol = 1e-10;
  double kkt_tol = 1e-8;
  std::size_t max_iterations = 0;  // 0 means 200 * n
};

enum class QpStatus { optimal, max_iter, infeasible };

std::string_view to_string(QpStatus status);

struct QpSolution {
  Eigen::VectorXd theta;
  double objective = 0.0;  // ||A theta - y||^2
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
  QpStatus status = QpStatus::optimal;
  bool regularized = false;  // normal matrix needed a diagonal shift
  std::vector<std::size_t> active;  // active inequality rows at the solution
  std::optional<std::size_t> certificate_row;  // violated row when infeasible
};

// Inequality rows of a constraint set in a fixed order: sign rows
// (-theta_k <= 0) for every nonneg entry by ascending k, then chain rows
// kappa*(theta_k - theta_{k+1}) <= 0 for k = 0..n-2. Row indices in
// QpSolution refer to this order.
struct InequalityRow {
  std::size_t first;
  double first_coeff;
  std::optional<std::size_t> second;
  double second_coeff = 0.0;
};
std::vector<InequalityRow> inequality_rows(const ConstraintSet& constraints, std::size_t n);

// min ||A theta - y||^2 over the constraint set, by a primal active-set method
// on the normal equations with the anchored entries substituted out.
QpSolution solve_cls(const RowMatrix& a, const Eigen::VectorXd& y, const ConstraintSet& constraints,
                     const QpOptions& options = {});
QpSolution solve_cls(const NormalEquations& normal, const ConstraintSet& constraints,
                     const QpOptions& options = {});

} // namespace kdisc
