#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "csos/sdp.hpp"

namespace csos::sdp {
namespace {

double min_eig(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff();
}

void expect_certified(const SdpInstance& inst, const SdpSolution& sol) {
  ASSERT_EQ(sol.status, SolveStatus::kOptimal) << sol.message;
  EXPECT_LE(sol.residuals.max(), 1e-7);
  EXPECT_LE(sol.dual_objective, sol.objective_value + 1e-6);
  for (const auto& blk : sol.block_values) EXPECT_GE(min_eig(blk), -1e-7);
  for (const auto& c : inst.constraints) {
    EXPECT_NEAR(evaluate(c.lhs, sol.block_values, sol.free_values), c.rhs, 1e-7);
  }
}

// minimize x subject to X = [x] >= 0, x = rhs.
SdpInstance scalar_problem(double rhs) {
  SdpInstance inst;
  inst.psd_blocks = {1};
  inst.objective.matrix_terms = {{0, 0, 0, 1.0}};
  inst.constraints.push_back({{{{0, 0, 0, 1.0}}, {}}, rhs});
  return inst;
}

TEST(SdpTest, ScalarEquality) {
  const auto inst = scalar_problem(2.0);
  const auto sol = solve(inst);
  expect_certified(inst, sol);
  EXPECT_NEAR(sol.objective_value, 2.0, 1e-6);
}

TEST(SdpTest, TraceWithFixedOffDiagonal) {
  // min x11 + x22 s.t. x12 = 1; det >= 0 forces x11 x22 >= 1, optimum 2.
  SdpInstance inst;
  inst.psd_blocks = {2};
  inst.objective.matrix_terms = {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}};
  inst.constraints.push_back({{{{0, 0, 1, 0.5}}, {}}, 1.0});
  const auto sol = solve(inst);
  expect_certified(inst, sol);
  EXPECT_NEAR(sol.objective_value, 2.0, 1e-6);
  EXPECT_NEAR(sol.block_values[0](0, 0), 1.0, 1e-5);
  EXPECT_NEAR(sol.block_values[0](1, 1), 1.0, 1e-5);
}

TEST(SdpTest, NegativeScalarIsInfeasible) {
  const auto sol = solve(scalar_problem(-1.0));
  ASSERT_EQ(sol.status, SolveStatus::kInfeasible) << sol.message;
  // Farkas ray: b'y = 1 and A*(y) = -S <= 0.
  EXPECT_NEAR(-1.0 * sol.dual_values[0], 1.0, 1e-9);
  EXPECT_LE(sol.dual_values[0], 0.0);
}

TEST(SdpTest, UnboundedDetected) {
  // min -t, t free, no constraints tying it.
  SdpInstance inst;
  inst.psd_blocks = {1};
  inst.free_vars = 1;
  inst.objective.free_terms = {{0, -1.0}};
  inst.constraints.push_back({{{{0, 0, 0, 1.0}}, {}}, 1.0});
  const auto sol = solve(inst);
  EXPECT_NE(sol.status, SolveStatus::kOptimal);
}

TEST(SdpTest, FreeVariablesAndMultipleBlocks) {
  // max t s.t. [[1, t],[t, 1]] >= 0 written as X - t E12 = I pattern:
  // X00 = 1, X11 = 1, X01 - t = 0. Optimum t = 1.
  SdpInstance inst;
  inst.psd_blocks = {2, 1};
  inst.free_vars = 1;
  inst.objective.free_terms = {{0, -1.0}};
  inst.constraints.push_back({{{{0, 0, 0, 1.0}}, {}}, 1.0});
  inst.constraints.push_back({{{{0, 1, 1, 1.0}}, {}}, 1.0});
  inst.constraints.push_back({{{{0, 0, 1, 0.5}}, {{0, -1.0}}}, 0.0});
  // Second block: s = 3 - t >= 0, inactive.
  inst.constraints.push_back({{{{1, 0, 0, 1.0}}, {{0, 1.0}}}, 3.0});
  const auto sol = solve(inst);
  expect_certified(inst, sol);
  EXPECT_NEAR(sol.free_values[0], 1.0, 1e-6);
}

TEST(SdpTest, RandomFeasibleProblemsSatisfyDualityAndFeasibility) {
  std::mt19937 rng(42);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 4;
    // Constraints built around a known interior point X0 = I.
    SdpInstance inst;
    inst.psd_blocks = {n};
    for (int r = 0; r < n; ++r) {
      for (int c = r; c < n; ++c) {
        inst.objective.matrix_terms.push_back({0, r, c, r == c ? 1.0 + std::abs(n01(rng)) : 0.1 * n01(rng)});
      }
    }
    for (int i = 0; i < 5; ++i) {
      EqualityConstraint con;
      double rhs = 0.0;
      for (int r = 0; r < n; ++r) {
        const double v = n01(rng);
        con.lhs.matrix_terms.push_back({0, r, r, v});
        rhs += v;
      }
      con.rhs = rhs;
      inst.constraints.push_back(con);
    }
    const auto sol = solve(inst);
    expect_certified(inst, sol);
  }
}

TEST(SdpTest, Deterministic) {
  const auto inst = scalar_problem(2.0);
  const auto a = solve(inst);
  const auto b = solve(inst);
  EXPECT_EQ(a.objective_value, b.objective_value);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(SdpTest, InstanceTextRoundTrip) {
  SdpInstance inst;
  inst.psd_blocks = {2, 1};
  inst.free_vars = 1;
  inst.objective.free_terms = {{0, -1.0}};
  inst.constraints.push_back({{{{0, 0, 1, 0.5}, {1, 0, 0, 1.0}}, {{0, -1.0}}}, 0.25});
  std::stringstream ss;
  write_instance(ss, inst);
  const auto back = read_instance(ss);
  EXPECT_EQ(back.psd_blocks, inst.psd_blocks);
  EXPECT_EQ(back.free_vars, 1);
  ASSERT_EQ(back.constraints.size(), 1u);
  EXPECT_EQ(back.constraints[0].rhs, 0.25);
  EXPECT_EQ(back.constraints[0].lhs.matrix_terms.size(), 2u);
  EXPECT_EQ(back.constraints[0].lhs.matrix_terms[0].col, 1);
}

TEST(SdpTest, ValidateRejectsUndeclaredReferences) {
  SdpInstance inst;
  inst.psd_blocks = {1};
  inst.constraints.push_back({{{{1, 0, 0, 1.0}}, {}}, 1.0});
  EXPECT_THROW(inst.validate(), std::invalid_argument);
  inst.psd_blocks = {0};
  EXPECT_THROW(inst.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace csos::sdp
