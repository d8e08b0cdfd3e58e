#pragma once

// Classical-model multimachine dynamics in the reference-machine frame, the
// polynomial recasting of those dynamics, and the affine maps between the
// recast charts of different switching states.
//
// Machine ordering: internally the reference generator is always the last
// machine. Relative angles delta_i = delta_i - delta_ref, i < n_g - 1.
//
// Chart layout for m = n_g - 1 machines (3m coordinates):
//   z[i]          = omega_i
//   z[m + 2i]     = sin(delta_i - sep_i)
//   z[m + 2i + 1] = 1 - cos(delta_i - sep_i)

#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csos/polynomial.hpp"
#include "csos/switching.hpp"

namespace csos::psys {

class NetworkError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Bus {
  int id = 0;
  std::string type;
};

struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;  // total charging susceptance, split between the ends
};

struct Generator {
  int bus = 0;
  double M = 0.0;
  double D = 0.0;
  double E = 0.0;
  double xd = 0.0;  // transient reactance
  double Pm = 0.0;
};

struct RgUnit {
  int id = 0;
  int bus = 0;
  double P = 0.0;
};

struct Load {
  int bus = 0;
  double P = 0.0;
  double Q = 0.0;
};

struct NetworkModel {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<RgUnit> rg_units;  // sorted by id, ids 1..n
  std::vector<Load> loads;
  int reference = 0;  // 0-based index into generators
  double damping_tolerance = 1e-9;
  // Bus voltage magnitudes used for the constant-admittance conversion;
  // buses not listed use 1.0 pu.
  std::map<int, double> voltage_profile;

  int num_rg() const { return static_cast<int>(rg_units.size()); }
  int num_machines() const { return static_cast<int>(generators.size()); }
  // Uniform D/M.
  double damping_ratio() const;
  // Throws NetworkError: unknown buses, non-uniform damping, bad
  // reference, disconnected graph, unit ids not 1..n.
  void validate() const;
};

// JSON document with sections buses, branches, generators, rg_units, loads,
// options. Validates before returning.
NetworkModel parse_network(const std::string& json_text);
NetworkModel load_network(const std::string& path);

// Bus admittance matrix over the network buses followed by one internal node
// per generator (in generator order). Loads become P - jQ over |V|^2, online
// units become -P over |V|^2.
Eigen::MatrixXcd build_ybus(const NetworkModel& net, const SwitchingState& sigma);

// Schur complement onto `retained` (indices into ybus) eliminating the other
// nodes one at a time in index order. Throws NetworkError naming the node
// whose pivot magnitude is below pivot_tolerance.
Eigen::MatrixXcd kron_reduce(const Eigen::MatrixXcd& ybus, const std::vector<int>& retained,
                             double pivot_tolerance = 1e-12);

struct ReducedSystem {
  SwitchingState sigma;
  // Machine data with the reference last.
  Eigen::MatrixXd G, B;
  Eigen::VectorXd E, Pm, M;
  double lambda = 0.0;  // D/M
  Eigen::VectorXd sep;  // relative angles, length n_g - 1

  int num_machines() const { return static_cast<int>(E.size()); }
  int dim() const { return num_machines() - 1; }
};

// Reduced matrices for one switching state (SEP left empty).
ReducedSystem reduce(const NetworkModel& net, const SwitchingState& sigma);

// Electrical power of every machine at relative angles delta (reference 0).
Eigen::VectorXd electrical_power(const ReducedSystem& sys, const Eigen::VectorXd& delta);
// Acceleration mismatch at zero speed; zero at an equilibrium.
Eigen::VectorXd mismatch(const ReducedSystem& sys, const Eigen::VectorXd& delta);
Eigen::MatrixXd mismatch_jacobian(const ReducedSystem& sys, const Eigen::VectorXd& delta);

struct SepResult {
  Eigen::VectorXd delta;
  double residual = 0.0;
  int iterations = 0;
  // Linearization has all eigenvalues in the open left half plane.
  bool stable = false;
};

// Newton iteration on the mismatch. Throws std::runtime_error on
// non-convergence or a singular Jacobian.
SepResult solve_sep(const ReducedSystem& sys, const Eigen::VectorXd& guess,
                    int max_iterations = 50, double tolerance = 1e-10);

// Time derivative of (delta, omega), each of length n_g - 1.
Eigen::VectorXd vector_field(const ReducedSystem& sys, const Eigen::VectorXd& state);
// Jacobian of vector_field at (sep, 0).
Eigen::MatrixXd linearization(const ReducedSystem& sys);

struct RecastSystem {
  int m = 0;
  std::vector<Polynomial> f;  // length 3m
  std::vector<Polynomial> g;  // length m
  int nvars() const { return 3 * m; }
  static int speed(int i) { return i; }
  int sin_index(int i) const { return m + 2 * i; }
  int cos_index(int i) const { return m + 2 * i + 1; }
};

RecastSystem recast(const ReducedSystem& sys);

// Physical state (delta, omega) to chart coordinates about `sep` and back.
Eigen::VectorXd to_chart(const Eigen::VectorXd& sep, const Eigen::VectorXd& state);
// Angles recovered with atan2, i.e. within (-pi, pi] of the SEP.
Eigen::VectorXd from_chart(const Eigen::VectorXd& sep, const Eigen::VectorXd& z);

struct AffineMap {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd apply(const Eigen::VectorXd& z) const { return A * z + b; }
};

// z_to = A z_from + b for the charts centred at sep_from and sep_to.
AffineMap chart_map(const Eigen::VectorXd& sep_from, const Eigen::VectorXd& sep_to);

}  // namespace csos::psys
