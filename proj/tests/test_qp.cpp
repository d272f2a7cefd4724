#include "doctest.h"
#include "oracles.hpp"

#include "kdisc/errors.hpp"
#include "kdisc/qp.hpp"
#include "kdisc/random.hpp"

#include <Eigen/Dense>

#include <random>

using namespace kdisc;

namespace {

RowMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, SplitMix64& rng) {
  std::normal_distribution<double> g;
  RowMatrix a(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) a(r, c) = g(rng);
  return a;
}

double max_violation(const ConstraintSet& cs, const Eigen::VectorXd& theta) {
  double worst = 0.0;
  for (const auto& row : inequality_rows(cs, static_cast<std::size_t>(theta.size()))) {
    double v = row.first_coeff * theta[static_cast<Eigen::Index>(row.first)];
    if (row.second) v += row.second_coeff * theta[static_cast<Eigen::Index>(*row.second)];
    worst = std::max(worst, v);
  }
  for (const auto& [k, v] : cs.anchors) worst = std::max(worst, std::abs(theta[static_cast<Eigen::Index>(k)] - v));
  return worst;
}

} // namespace

TEST_SUITE("qp") {

TEST_CASE("unconstrained problem returns the least-squares solution") {
  SplitMix64 rng(1);
  const RowMatrix a = random_matrix(30, 5, rng);
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(30, -1.0, 2.0);
  const auto sol = solve_cls(a, y, ConstraintSet{});
  const Eigen::VectorXd ls = a.colPivHouseholderQr().solve(y);
  CHECK((sol.theta - ls).norm() <= 1e-10);
  CHECK(sol.status == QpStatus::optimal);
  CHECK(sol.objective == doctest::Approx((a * ls - y).squaredNorm()));
}

TEST_CASE("anchors are honoured exactly") {
  SplitMix64 rng(2);
  const RowMatrix a = random_matrix(20, 4, rng);
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(20);
  const auto sol = solve_cls(a, y, build_constraints_for_drift(4, 1.5, 0));
  CHECK(sol.theta[0] == 1.5);
}

TEST_CASE("nonnegativity clips a negative least-squares coefficient") {
  RowMatrix a = RowMatrix::Identity(2, 2);
  const Eigen::Vector2d y(-1.0, 2.0);
  const auto sol = solve_cls(a, y, build_constraints_for_diffusion(2, {}, 0));
  CHECK(sol.theta[0] == doctest::Approx(0.0));
  CHECK(sol.theta[1] == doctest::Approx(2.0));
  REQUIRE(sol.active.size() == 1);
  CHECK(sol.active[0] == 0);
}

TEST_CASE("decreasing chain pools violators") {
  RowMatrix a = RowMatrix::Identity(3, 3);
  const Eigen::Vector3d y(1.0, 2.0, 0.0);
  const auto sol = solve_cls(a, y, build_constraints_for_drift(3, std::nullopt, -1));
  CHECK(sol.theta[0] == doctest::Approx(1.5));
  CHECK(sol.theta[1] == doctest::Approx(1.5));
  CHECK(sol.theta[2] == doctest::Approx(0.0));
}

TEST_CASE("inequality row order: signs first, then the chain") {
  ConstraintSet cs;
  cs.sign = {Sign::nonneg, Sign::free, Sign::nonneg};
  cs.monotonicity = 1;
  const auto rows = inequality_rows(cs, 3);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].first == 0);
  CHECK(rows[1].first == 2);
  CHECK(rows[2].first == 0);
  CHECK(*rows[2].second == 1);
  CHECK(rows[2].first_coeff == 1.0);
  CHECK(rows[2].second_coeff == -1.0);
}

TEST_CASE("infeasible anchors are reported with a certificate") {
  RowMatrix a = RowMatrix::Identity(3, 3);
  const auto cs = build_constraints_for_diffusion(3, {{0, -1.0}}, 0);
  const auto sol = solve_cls(a, Eigen::Vector3d::Ones(), cs);
  CHECK(sol.status == QpStatus::infeasible);
  CHECK(sol.certificate_row.has_value());
}

TEST_CASE("malformed constraint sets are rejected") {
  ConstraintSet cs;
  cs.anchors = {{5, 1.0}};
  CHECK_THROWS_AS(cs.validate(3), ConfigError);
  cs.anchors = {{0, 1.0}, {0, 2.0}};
  CHECK_THROWS_AS(cs.validate(3), ConfigError);
  cs.anchors.clear();
  cs.monotonicity = 2;
  CHECK_THROWS_AS(cs.validate(3), ConfigError);
}

TEST_CASE("rank-deficient design is regularized, not rejected") {
  RowMatrix a = RowMatrix::Zero(4, 3);
  a.col(0).setOnes();
  a.col(1).setOnes();
  const auto sol = solve_cls(a, Eigen::VectorXd::Ones(4), build_constraints_for_drift(3, std::nullopt, -1));
  CHECK(sol.status == QpStatus::optimal);
  CHECK(sol.regularized);
  CHECK(sol.objective == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("weighted accumulation equals stacking scaled rows") {
  SplitMix64 rng(4);
  const RowMatrix a1 = random_matrix(6, 3, rng), a2 = random_matrix(5, 3, rng);
  const Eigen::VectorXd y1 = Eigen::VectorXd::Ones(6), y2 = Eigen::VectorXd::LinSpaced(5, 0, 1);
  auto ne = NormalEquations::zeros(3);
  ne.accumulate(NormalEquations::from(a1, y1), 0.25).accumulate(NormalEquations::from(a2, y2), 4.0);
  RowMatrix stacked(11, 3);
  stacked << 0.5 * a1, 2.0 * a2;
  Eigen::VectorXd ys(11);
  ys << 0.5 * y1, 2.0 * y2;
  CHECK((ne.gram - stacked.transpose() * stacked).norm() <= 1e-12);
  CHECK((ne.rhs - stacked.transpose() * ys).norm() <= 1e-12);
  CHECK(ne.yty == doctest::Approx(ys.squaredNorm()));
}

TEST_CASE("random instances match exhaustive enumeration") {
  SplitMix64 rng(2024);
  std::uniform_int_distribution<int> size(2, 6), mono(-1, 1), coin(0, 1);
  std::normal_distribution<double> g;
  for (int t = 0; t < 40; ++t) {
    const int n = size(rng);
    const RowMatrix a = random_matrix(3 * n, n, rng);
    Eigen::VectorXd y(3 * n);
    for (auto& v : y) v = g(rng);
    ConstraintSet cs;
    cs.monotonicity = mono(rng);
    cs.sign.resize(static_cast<std::size_t>(n));
    for (auto& s : cs.sign) s = coin(rng) ? Sign::nonneg : Sign::free;
    if (coin(rng)) cs.anchors = {{0, std::abs(g(rng))}};
    const auto ref = oracle::enumerate_qp(a, y, cs);
    const auto sol = solve_cls(a, y, cs);
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK(max_violation(cs, sol.theta) <= 1e-10);
    CHECK(std::abs(sol.objective - ref.objective) <= 1e-9 * std::max(1.0, ref.objective));
  }
}

}
