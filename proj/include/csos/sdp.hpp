#pragma once

// Semidefinite programs over block-diagonal PSD matrices plus free scalars:
//
//   minimize    <C, X> + c_f' x + objective_constant
//   subject to  <A_i, X> + f_i' x = b_i,   i = 1..m
//               X = diag(X_1, ..., X_k) >= 0,  x free.
//
// Matrix coefficients use SDPA semantics: an entry (block, row, col, v) with
// row <= col stands for the symmetric pair A[row][col] = A[col][row] = v, so
// an off-diagonal entry contributes 2 * v * X[row][col] to <A, X>.

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace csos::sdp {

struct MatrixEntry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

struct LinearFunctional {
  std::vector<MatrixEntry> matrix_terms;
  std::vector<std::pair<int, double>> free_terms;
};

struct EqualityConstraint {
  LinearFunctional lhs;
  double rhs = 0.0;
};

struct SdpInstance {
  std::vector<int> psd_blocks;
  int free_vars = 0;
  LinearFunctional objective;
  double objective_constant = 0.0;
  std::vector<EqualityConstraint> constraints;

  // Throws std::invalid_argument naming the offending constraint.
  void validate() const;
};

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kNumericalFailure };

const char* to_string(SolveStatus s);

struct SolveOptions {
  double tolerance = 1e-7;
  int max_iterations = 200;
  // Relative size of a Farkas ray residual accepted as an infeasibility
  // certificate.
  double infeasibility_tolerance = 1e-8;
  double step_fraction = 0.95;
  // Stop with kNumericalFailure once the largest residual has not halved for
  // this many iterations; 0 disables the check.
  int stall_iterations = 0;
  // When positive, a run that ends without meeting `tolerance` still reports
  // kOptimal with its best iterate if that iterate's residuals are below this.
  double acceptable_tolerance = 0.0;
  bool verbose = false;
};

struct Residuals {
  // Infinity norms of the equality residuals ||A(X) + F x - b|| and
  // ||A*(y) + S - C||, ||F'y - c_f||; relative gap |p - d| / (1 + |p| + |d|).
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double max() const;
};

struct SdpSolution {
  SolveStatus status = SolveStatus::kNumericalFailure;
  std::vector<Eigen::MatrixXd> block_values;
  Eigen::VectorXd free_values;
  // Dual multipliers and slack; for kInfeasible these hold the normalized
  // Farkas ray (b'y = 1, A*(y) + S ~ 0, S >= 0).
  Eigen::VectorXd dual_values;
  std::vector<Eigen::MatrixXd> dual_slack;
  double objective_value = 0.0;
  double dual_objective = 0.0;
  Residuals residuals;
  int iterations = 0;
  std::string message;
};

SdpSolution solve(const SdpInstance& instance, const SolveOptions& options = {});

// Evaluates a linear functional at a (block, free) point.
double evaluate(const LinearFunctional& f,
                const std::vector<Eigen::MatrixXd>& blocks,
                const Eigen::VectorXd& free_values);

// Sparse text dump for cross-checking against external solvers:
//   sdp <num_blocks> <free_vars> <num_constraints>
//   blocks <n_1> ... <n_k>
//   objective_constant <c>
//   m 0 <block> <row> <col> <value>     (objective, 1-based indices)
//   f 0 <var> <value>
//   m <i> <block> <row> <col> <value>   (constraint i, 1-based)
//   f <i> <var> <value>
//   b <i> <rhs>
void write_instance(std::ostream& out, const SdpInstance& instance);
SdpInstance read_instance(std::istream& in);

}  // namespace csos::sdp
