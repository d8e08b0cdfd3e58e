#pragma once

// Time-domain validation: an adaptive Dormand-Prince 5(4) integrator, switched
// cascade trajectories, level-set boundary sampling and Lyapunov traces.

#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csos/polynomial.hpp"
#include "csos/psys.hpp"

namespace csos::sim {

using Rhs = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

struct OdeOptions {
  double rtol = 1e-9;
  double atol = 1e-9;
  double initial_step = 0.0;  // 0 picks one from the derivative scale
  // Constant step initial_step without error control.
  bool fixed_step = false;
  double min_step = 1e-14;
  long max_steps = 10000000;
  // Integration stops with exploded = true once |x|_inf exceeds this.
  double max_norm = 1e6;
};

struct OdeResult {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;  // every accepted step, endpoints included
  long steps = 0;
  long rejected = 0;
  bool exploded = false;
};

// Integrates from t0 to t1 (t1 > t0); the last sample lands exactly on t1
// unless the solution explodes. Throws std::runtime_error on step-size
// underflow.
OdeResult integrate(const Rhs& f, double t0, const Eigen::VectorXd& x0, double t1,
                    const OdeOptions& options = {});

enum class Verdict { kConverged, kDiverged, kUndecided };
const char* to_string(Verdict v);

struct SwitchEvent {
  double time = 0.0;
  int from_state = 0;
  int to_state = 0;
};

struct SwitchedTrajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;  // physical (delta, omega)
  std::vector<int> stage;          // index into the system chain per sample
  std::vector<SwitchEvent> switches;
  Verdict verdict = Verdict::kUndecided;
  // Max |delta - sep_final| at the end, not reduced modulo 2 pi.
  double final_error = 0.0;
  double final_speed = 0.0;
};

struct SwitchedOptions {
  OdeOptions ode;
  double horizon = 20.0;  // after the last switch
  double angle_tolerance = 1e-3;
  double speed_tolerance = 1e-3;
  // Divergence once |omega|_inf or |delta - sep|_inf exceeds this.
  double divergence_bound = 100.0;
};

// chain[k] is active on [switch_times[k-1], switch_times[k]); switch_times
// are absolute, strictly increasing, one per trip (chain.size() - 1).
SwitchedTrajectory integrate_switched(const std::vector<psys::ReducedSystem>& chain,
                                      const Eigen::VectorXd& x0,
                                      const std::vector<double>& switch_times,
                                      const SwitchedOptions& options = {});

// Cumulative switch instants from intervals drawn uniformly in [0, max_gap].
std::vector<double> random_switch_times(int trips, std::mt19937_64& rng, double max_gap = 2.0);

// Points x with level(x) = 1 found by bisection along random rays from the
// origin; a ray that does not reach level 1 within max_radius is redrawn.
// Throws std::runtime_error when too many rays miss.
std::vector<Eigen::VectorXd> radial_boundary(const std::function<double(const Eigen::VectorXd&)>& level,
                                             int dim, int count, std::mt19937_64& rng,
                                             const std::vector<double>& max_radius,
                                             double tolerance = 1e-10);

// Physical states on {V = 1} for a chart-coordinate V centred at sep. Angle
// offsets stay within (-pi, pi).
std::vector<Eigen::VectorXd> boundary_sample(const Polynomial& V, const Eigen::VectorXd& sep, int count,
                                             std::mt19937_64& rng, double max_speed = 50.0);

// V of the active stage, in that stage's chart, at every sample.
std::vector<double> lyapunov_trace(const SwitchedTrajectory& traj,
                                   const std::vector<psys::ReducedSystem>& chain,
                                   const std::vector<Polynomial>& V);

// Columns t, delta_1..m, omega_1..m, state, V.
void write_trajectory_csv(std::ostream& out, const SwitchedTrajectory& traj,
                          const std::vector<psys::ReducedSystem>& chain, const std::vector<double>& trace);

}  // namespace csos::sim
