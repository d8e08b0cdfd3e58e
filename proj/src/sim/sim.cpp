#include "csos/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace csos::sim {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& x, const Eigen::VectorXd& xn,
                  const OdeOptions& o) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = o.atol + o.rtol * std::max(std::abs(x(i)), std::abs(xn(i)));
    s += (err(i) / sc) * (err(i) / sc);
  }
  return std::sqrt(s / std::max<Eigen::Index>(1, err.size()));
}

}  // namespace

OdeResult integrate(const Rhs& f, double t0, const Eigen::VectorXd& x0, double t1,
                    const OdeOptions& o) {
  if (!(t1 > t0)) throw std::invalid_argument("integrate: t1 must exceed t0");
  OdeResult res;
  res.t.push_back(t0);
  res.x.push_back(x0);
  double t = t0;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd k1 = f(t, x);
  double h = o.initial_step;
  if (h <= 0.0) {
    const double d0 = x.lpNorm<Eigen::Infinity>();
    const double d1 = k1.lpNorm<Eigen::Infinity>();
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  }
  if (o.fixed_step && h <= 0.0) throw std::invalid_argument("integrate: fixed step needs initial_step");
  h = std::min(h, t1 - t0);
  while (t < t1) {
    if (res.steps + res.rejected >= o.max_steps) {
      throw std::runtime_error("integrate: step budget exhausted at t = " + std::to_string(t));
    }
    bool last = false;
    if (t + h >= t1) {
      h = t1 - t;
      last = true;
    }
    const Eigen::VectorXd k2 = f(t + c2 * h, x + h * (a21 * k1));
    const Eigen::VectorXd k3 = f(t + c3 * h, x + h * (a31 * k1 + a32 * k2));
    const Eigen::VectorXd k4 = f(t + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Eigen::VectorXd k5 = f(t + c5 * h, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Eigen::VectorXd k6 = f(t + h, x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Eigen::VectorXd xn = x + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const Eigen::VectorXd k7 = f(t + h, xn);
    const Eigen::VectorXd err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = error_norm(err, x, xn, o);
    if (!std::isfinite(en)) {
      h *= 0.1;
      ++res.rejected;
      if (h < o.min_step) throw std::runtime_error("integrate: step size underflow");
      continue;
    }
    const double factor = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
    if (o.fixed_step || en <= 1.0) {
      t = last ? t1 : t + h;
      x = xn;
      k1 = k7;
      ++res.steps;
      res.t.push_back(t);
      res.x.push_back(x);
      if (x.lpNorm<Eigen::Infinity>() > o.max_norm) {
        res.exploded = true;
        break;
      }
      if (!o.fixed_step) h *= factor;
    } else {
      ++res.rejected;
      h *= factor;
      if (h < o.min_step) {
        throw std::runtime_error("integrate: step size underflow at t = " + std::to_string(t));
      }
    }
  }
  return res;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kConverged:
      return "converged";
    case Verdict::kDiverged:
      return "diverged";
    case Verdict::kUndecided:
      return "undecided";
  }
  return "?";
}

SwitchedTrajectory integrate_switched(const std::vector<psys::ReducedSystem>& chain,
                                      const Eigen::VectorXd& x0,
                                      const std::vector<double>& switch_times,
                                      const SwitchedOptions& options) {
  if (chain.empty()) throw std::invalid_argument("integrate_switched: empty chain");
  if (switch_times.size() + 1 != chain.size()) {
    throw std::invalid_argument("integrate_switched: need one switch time per trip");
  }
  for (size_t k = 0; k < switch_times.size(); ++k) {
    if (switch_times[k] < 0.0 || (k > 0 && !(switch_times[k] > switch_times[k - 1]))) {
      throw std::invalid_argument("integrate_switched: switch times must be increasing and nonnegative");
    }
  }
  const psys::ReducedSystem& final_sys = chain.back();
  const int m = final_sys.dim();
  SwitchedTrajectory traj;
  traj.t.push_back(0.0);
  traj.x.push_back(x0);
  traj.stage.push_back(0);
  Eigen::VectorXd x = x0;
  double t = 0.0;
  OdeOptions ode = options.ode;
  ode.max_norm = std::min(ode.max_norm, options.divergence_bound + final_sys.sep.lpNorm<Eigen::Infinity>() + 10.0);
  bool exploded = false;
  for (size_t k = 0; k < chain.size() && !exploded; ++k) {
    const double t_end = k < switch_times.size() ? switch_times[k] : t + options.horizon;
    if (k > 0) {
      traj.switches.push_back({t, chain[k - 1].sigma.id(), chain[k].sigma.id()});
    }
    if (t_end > t) {
      const auto& sys = chain[k];
      const auto seg = integrate([&sys](double, const Eigen::VectorXd& s) { return psys::vector_field(sys, s); },
                                 t, x, t_end, ode);
      for (size_t i = 1; i < seg.t.size(); ++i) {
        traj.t.push_back(seg.t[i]);
        traj.x.push_back(seg.x[i]);
        traj.stage.push_back(static_cast<int>(k));
      }
      x = seg.x.back();
      t = seg.t.back();
      exploded = seg.exploded;
    }
  }
  const Eigen::VectorXd angle_err = x.head(m) - final_sys.sep;
  traj.final_error = angle_err.lpNorm<Eigen::Infinity>();
  traj.final_speed = x.tail(m).lpNorm<Eigen::Infinity>();
  if (exploded || traj.final_speed > options.divergence_bound || traj.final_error > options.divergence_bound) {
    traj.verdict = Verdict::kDiverged;
  } else if (traj.final_error <= options.angle_tolerance && traj.final_speed <= options.speed_tolerance) {
    traj.verdict = Verdict::kConverged;
  } else {
    traj.verdict = Verdict::kUndecided;
  }
  return traj;
}

std::vector<double> random_switch_times(int trips, std::mt19937_64& rng, double max_gap) {
  std::uniform_real_distribution<double> gap(0.0, max_gap);
  std::vector<double> times;
  double t = 0.0;
  for (int k = 0; k < trips; ++k) {
    double g = gap(rng);
    // Strictly increasing instants.
    while (g <= 0.0) g = gap(rng);
    t += g;
    times.push_back(t);
  }
  return times;
}

std::vector<Eigen::VectorXd> radial_boundary(const std::function<double(const Eigen::VectorXd&)>& level,
                                             int dim, int count, std::mt19937_64& rng,
                                             const std::vector<double>& max_radius, double tolerance) {
  if (static_cast<int>(max_radius.size()) != dim) {
    throw std::invalid_argument("radial_boundary: one radius bound per coordinate");
  }
  std::normal_distribution<double> n01;
  std::vector<Eigen::VectorXd> out;
  int misses = 0;
  constexpr int kScan = 400;
  while (static_cast<int>(out.size()) < count) {
    Eigen::VectorXd d(dim);
    for (int i = 0; i < dim; ++i) d(i) = n01(rng);
    if (d.norm() == 0.0) continue;
    d.normalize();
    // Largest t keeping every coordinate inside its bound.
    double t_max = std::numeric_limits<double>::infinity();
    for (int i = 0; i < dim; ++i) {
      if (d(i) != 0.0) t_max = std::min(t_max, max_radius[i] / std::abs(d(i)));
    }
    double lo = 0.0, hi = -1.0;
    for (int s = 1; s <= kScan; ++s) {
      const double t = t_max * s / kScan;
      if (level(t * d) >= 1.0) {
        hi = t;
        break;
      }
      lo = t;
    }
    if (hi < 0.0) {
      if (++misses > 100 * count + 1000) {
        throw std::runtime_error("radial_boundary: level 1 not reached along sampled rays");
      }
      continue;
    }
    Eigen::VectorXd p = hi * d;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double v = level(mid * d);
      if (v >= 1.0) {
        hi = mid;
      } else {
        lo = mid;
      }
      p = hi * d;
      if (std::abs(level(p) - 1.0) <= tolerance || hi - lo <= 1e-16 * hi) break;
    }
    out.push_back(p);
  }
  return out;
}

std::vector<Eigen::VectorXd> boundary_sample(const Polynomial& V, const Eigen::VectorXd& sep, int count,
                                             std::mt19937_64& rng, double max_speed) {
  const int m = static_cast<int>(sep.size());
  if (V.nvars() != 3 * m) throw std::invalid_argument("boundary_sample: V chart dimension mismatch");
  auto level = [&](const Eigen::VectorXd& offset) {
    Eigen::VectorXd x(2 * m);
    x.head(m) = sep + offset.head(m);
    x.tail(m) = offset.tail(m);
    return eval(V, psys::to_chart(sep, x));
  };
  std::vector<double> bounds(2 * m, max_speed);
  for (int i = 0; i < m; ++i) bounds[i] = M_PI * (1.0 - 1e-9);
  auto offsets = radial_boundary(level, 2 * m, count, rng, bounds);
  for (auto& o : offsets) o.head(m) += sep;
  return offsets;
}

std::vector<double> lyapunov_trace(const SwitchedTrajectory& traj,
                                   const std::vector<psys::ReducedSystem>& chain,
                                   const std::vector<Polynomial>& V) {
  if (V.size() != chain.size()) throw std::invalid_argument("lyapunov_trace: one V per stage");
  std::vector<double> out(traj.t.size());
  for (size_t i = 0; i < traj.t.size(); ++i) {
    const int k = traj.stage[i];
    out[i] = eval(V[k], psys::to_chart(chain[k].sep, traj.x[i]));
  }
  return out;
}

void write_trajectory_csv(std::ostream& out, const SwitchedTrajectory& traj,
                          const std::vector<psys::ReducedSystem>& chain, const std::vector<double>& trace) {
  const int m = chain.front().dim();
  out << "t";
  for (int i = 0; i < m; ++i) out << ",delta_" << i + 1;
  for (int i = 0; i < m; ++i) out << ",omega_" << i + 1;
  out << ",state,V\n";
  char buf[40];
  for (size_t k = 0; k < traj.t.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g", traj.t[k]);
    out << buf;
    for (Eigen::Index i = 0; i < traj.x[k].size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", traj.x[k](i));
      out << "," << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", k < trace.size() ? trace[k] : 0.0);
    out << "," << chain[traj.stage[k]].sigma.id() << "," << buf << "\n";
  }
}

}  // namespace csos::sim
