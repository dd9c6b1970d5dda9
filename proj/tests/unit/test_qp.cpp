#include <doctest.h>

#include <random>

#include "support/oracles.hpp"
#include "tdmpc/qp.hpp"

using namespace tdmpc;
using namespace tdmpc::testing;

TEST_CASE("unconstrained QP returns -H^{-1} g") {
  MatrixXd H(2, 2);
  H << 2, 0.5, 0.5, 1;
  VectorXd g(2);
  g << 1, -1;
  Eigen::LLT<MatrixXd> llt(H);
  auto res = qp::solve(llt, g, MatrixXd(0, 2), VectorXd(0));
  CHECK(res.status == qp::Status::Optimal);
  CHECK((res.x + H.inverse() * g).norm() < 1e-14);
}

TEST_CASE("scalar QP with an active bound") {
  // min x^2 + x  s.t. x >= 1  ->  x = 1, multiplier 3
  MatrixXd H = MatrixXd::Constant(1, 1, 2.0);
  VectorXd g = VectorXd::Constant(1, 1.0);
  MatrixXd A = MatrixXd::Constant(1, 1, -1.0);
  VectorXd b = VectorXd::Constant(1, -1.0);
  auto res = qp::solve(Eigen::LLT<MatrixXd>(H), g, A, b);
  REQUIRE(res.status == qp::Status::Optimal);
  CHECK(res.x(0) == doctest::Approx(1.0));
  CHECK(res.multipliers(0) == doctest::Approx(3.0));
}

TEST_CASE("empty polytope is reported infeasible") {
  MatrixXd H = MatrixXd::Identity(1, 1);
  VectorXd g = VectorXd::Zero(1);
  MatrixXd A(2, 1);
  A << 1, -1;
  VectorXd b(2);
  b << -1, -1;  // x <= -1 and x >= 1
  auto res = qp::solve(Eigen::LLT<MatrixXd>(H), g, A, b);
  CHECK(res.status == qp::Status::Infeasible);
}

TEST_CASE("violated zero-normal row is infeasible, satisfied one is ignored") {
  MatrixXd H = MatrixXd::Identity(2, 2);
  VectorXd g = VectorXd::Ones(2);
  MatrixXd A = MatrixXd::Zero(1, 2);
  VectorXd b = VectorXd::Constant(1, -1e-3);
  CHECK(qp::solve(Eigen::LLT<MatrixXd>(H), g, A, b).status == qp::Status::Infeasible);
  b(0) = 1.0;
  auto res = qp::solve(Eigen::LLT<MatrixXd>(H), g, A, b);
  CHECK(res.status == qp::Status::Optimal);
  CHECK((res.x + g).norm() < 1e-14);
}

TEST_CASE("equality written as an opposite row pair") {
  // min 1/2|x|^2 - x0 - x1 s.t. x0 + x1 = 1
  MatrixXd H = MatrixXd::Identity(2, 2);
  VectorXd g = -VectorXd::Ones(2);
  MatrixXd A(2, 2);
  A << 1, 1, -1, -1;
  VectorXd b(2);
  b << 1, -1;
  auto res = qp::solve(Eigen::LLT<MatrixXd>(H), g, A, b);
  REQUIRE(res.status == qp::Status::Optimal);
  CHECK(res.x(0) == doctest::Approx(0.5));
  CHECK(res.x(1) == doctest::Approx(0.5));
  CHECK(qp::kkt_residual(H, g, A, b, res.x, res.multipliers).max() < 1e-12);
}

TEST_CASE("random small QPs agree with active-set enumeration") {
  std::mt19937_64 rng(1234);
  int solved = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index n = 1 + trial % 4;
    const Eigen::Index rows = 1 + trial % 9;
    const MatrixXd H = random_spd(rng, n, 0.2);
    const VectorXd g = random_vector(rng, n, 3.0);
    const MatrixXd A = random_matrix(rng, rows, n);
    // Feasible by construction: a random point satisfies every row.
    const VectorXd x_in = random_vector(rng, n);
    const VectorXd b = A * x_in + random_vector(rng, rows, 1.0).cwiseAbs();
    const auto ref = brute_force_qp(H, g, A, b);
    REQUIRE(ref.has_value());
    const auto res = qp::solve(Eigen::LLT<MatrixXd>(H), g, A, b);
    REQUIRE(res.status == qp::Status::Optimal);
    CHECK((res.x - *ref).norm() <= 1e-8 * (1.0 + ref->norm()));
    CHECK(qp::kkt_residual(H, g, A, b, res.x, res.multipliers).max() < 1e-9);
    ++solved;
  }
  CHECK(solved == 300);
}

TEST_CASE("degenerate rows: duplicates and dependent combinations") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 3;
    const MatrixXd H = random_spd(rng, n, 0.3);
    const VectorXd g = random_vector(rng, n, 4.0);
    MatrixXd base = random_matrix(rng, 3, n);
    MatrixXd A(6, n);
    A << base, base.row(0), base.row(0) + base.row(1), -base.row(2);
    VectorXd b(6);
    b.head(3) = VectorXd::Constant(3, 0.1) + random_vector(rng, 3, 0.1).cwiseAbs();
    b(3) = b(0);
    b(4) = b(0) + b(1);
    b(5) = -b(2) + 0.5;
    const auto res = qp::solve(Eigen::LLT<MatrixXd>(H), g, A, b);
    REQUIRE(res.status == qp::Status::Optimal);
    CHECK(qp::kkt_residual(H, g, A, b, res.x, res.multipliers).max() < 1e-9);
  }
}
