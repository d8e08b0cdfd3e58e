#include "csos/certify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "csos/sos.hpp"

namespace csos::certify {

using sos::PolyExpr;
using sos::PsatzOperands;
using sos::PsatzTemplate;
using sos::SosProgram;

namespace {

PolyExpr fixed(const Polynomial& p) { return PolyExpr(p); }

PolyExpr fixed_constant(int n, double v) { return PolyExpr(Polynomial::constant(n, v)); }

// grad(V) . f for V with decision coefficients.
PolyExpr lie_derivative(const PolyExpr& V, const std::vector<Polynomial>& f) {
  const int n = V.nvars();
  PolyExpr out(n);
  for (int k = 0; k < n; ++k) {
    PolyExpr dk(n);
    for (const auto& [e, c] : V.terms()) {
      if (e[k] == 0) continue;
      Exponent d = e;
      --d[k];
      dk.add_term(d, static_cast<double>(e[k]) * c);
    }
    out += dk * fixed(f[k]);
  }
  return out;
}

// Quadratic monomials plus, in a recast chart, the linear cos-type terms
// (which are quadratic to leading order on the manifold). No constant.
std::vector<Exponent> v_monomials(const PolySystem& sys, int degree) {
  const int n = sys.nvars();
  auto mons = sos::monomials_between(n, 2, degree);
  for (int i = 0; i < sys.angles; ++i) {
    Exponent e(n, 0);
    e[sys.angles + 2 * i + 1] = 1;
    mons.push_back(e);
  }
  return mons;
}

Polynomial l_term(const PolySystem& sys, double eps) {
  const int n = sys.nvars();
  Polynomial l(n);
  for (int k = 0; k < n; ++k) {
    Exponent e(n, 0);
    e[k] = 2;
    l.add_term(e, eps);
  }
  return l;
}

std::vector<PolyExpr> lambda_vector(SosProgram& prog, const PolySystem& sys, const std::string& name,
                                    int degree) {
  std::vector<PolyExpr> out;
  for (size_t i = 0; i < sys.g.size(); ++i) {
    out.push_back(prog.new_free_multiplier(name + "_" + std::to_string(i + 1), degree));
  }
  return out;
}

// Constraints are divided by their largest coefficient. Mixing a (p - beta)^2
// term of size beta^2 with unit-size constraints otherwise stalls the solver
// on feasible instances.
void add_scaled(SosProgram& prog, const std::string& name, const PolyExpr& e) {
  double m = 0.0;
  for (const auto& [mono, c] : e.terms()) {
    m = std::max(m, std::abs(c.constant()));
    for (const auto& [id, v] : c.coeffs()) m = std::max(m, std::abs(v));
  }
  prog.add_sos_constraint(name, m > 0.0 ? (1.0 / m) * e : e);
}

void add_all(SosProgram& prog, const std::string& prefix, const std::vector<PolyExpr>& cons) {
  for (size_t i = 0; i < cons.size(); ++i) add_scaled(prog, prefix + std::to_string(i + 1), cons[i]);
}

// Normalizes V so its largest coefficient is 1; level sets scale with c.
Polynomial normalized(const Polynomial& V) {
  const double m = V.max_abs_coeff();
  return m > 0.0 ? scale(V, 1.0 / m) : V;
}

struct Attempt {
  bool ok = false;
  sos::SosSolveResult result;
};

// Bisection steps need a converged solve; the maximization steps may fall
// back to the best iterate (their output is verified afterwards).
Attempt solve(const SosProgram& prog, const CertifyOptions& o, bool maximize = false) {
  Attempt a;
  sdp::SolveOptions so = o.sdp;
  if (maximize) so.acceptable_tolerance = o.acceptable_residual;
  a.result = prog.solve(so);
  a.ok = a.result.feasible();
  return a;
}

// Feasibility of the initial-estimate pair at a fixed beta.
Attempt initial_at(const PolySystem& sys, const Polynomial& p, double beta, const CertifyOptions& o,
                   PolyExpr* V_out) {
  const int n = sys.nvars();
  SosProgram prog(n);
  PsatzOperands ops;
  ops.g = sys.g;
  const PolyExpr V = prog.new_free_polynomial("V", v_monomials(sys, o.degrees.V));
  ops.V = V;
  ops.Vdot = lie_derivative(V, sys.f);
  ops.p = fixed(p);
  ops.beta = fixed_constant(n, beta);
  ops.l1 = fixed(l_term(sys, o.l_epsilon));
  ops.l2 = ops.l1;
  // -s2 beta is the constant coefficient of the first constraint while V, l1
  // and g vanish at the origin, so s2 is zero.
  ops.s[2] = PolyExpr(Polynomial(n));
  ops.s[6] = prog.new_sos_multiplier("s6", o.degrees.s6, o.degrees.s6 > 0);
  if (!sys.g.empty()) {
    ops.lambda[1] = lambda_vector(prog, sys, "lambda1", o.degrees.lambda);
    ops.lambda[2] = lambda_vector(prog, sys, "lambda2", o.degrees.lambda_decrease);
  }
  add_all(prog, "initial", sos::assemble_psatz_constraint(PsatzTemplate::kInitialEstimate, ops));
  *V_out = V;
  return solve(prog, o);
}

Attempt containment_at(const PolySystem& sys, const Polynomial& V, const Polynomial& p, double beta,
                       const std::optional<Polynomial>& V_next, double c, const CertifyOptions& o) {
  const int n = sys.nvars();
  SosProgram prog(n);
  PsatzOperands ops;
  ops.g = sys.g;
  ops.V = fixed(V);
  ops.p = fixed(p);
  ops.beta = fixed_constant(n, beta);
  ops.c = fixed_constant(n, c);
  ops.s[1] = prog.new_sos_multiplier("s1", o.degrees.s1);
  ops.s[2] = prog.new_sos_multiplier("s2", o.degrees.s2);
  ops.s[3] = prog.new_sos_multiplier("s3", o.degrees.s3);
  if (!sys.g.empty()) ops.lambda[1] = lambda_vector(prog, sys, "lambda1", o.degrees.lambda_containment);
  if (V_next) {
    ops.V_next = fixed(*V_next);
    ops.s[4] = prog.new_sos_multiplier("s4", o.degrees.s4);
    if (!sys.g.empty()) ops.lambda[2] = lambda_vector(prog, sys, "lambda2", o.degrees.lambda);
  }
  add_all(prog, "containment", sos::assemble_psatz_constraint(PsatzTemplate::kLocalContainment, ops));
  return solve(prog, o);
}

// {V_next <= 1} containment of {V <= 1}, V possibly undetermined.
std::vector<PolyExpr> successor_constraint(SosProgram& prog, const PolySystem& sys, const PolyExpr& V,
                                           const PolyExpr& s13, const Polynomial& V_next,
                                           const CertifyOptions& o) {
  PsatzOperands ops;
  ops.g = sys.g;
  ops.V = V;
  ops.V_next = fixed(V_next);
  ops.s[13] = s13;
  if (!sys.g.empty()) ops.lambda[4] = lambda_vector(prog, sys, "lambda4", o.degrees.lambda);
  return sos::assemble_psatz_constraint(PsatzTemplate::kSuccessorContainment, ops);
}

struct MultiplierStep {
  bool ok = false;
  double beta = 0.0;
  double t = 0.0;  // 1 / s6
  Polynomial s8;
  double s13 = 0.0;
  double residual = 0.0;
};

// beta is kept at or below beta_max so unbounded directions (linear
// systems) still give an optimal SDP.
sos::AffineExpr capped_beta(SosProgram& prog, const CertifyOptions& o) {
  const sos::AffineExpr beta = prog.new_free_scalar("beta");
  prog.add_equality("beta_cap", beta + prog.new_nonnegative_scalar("beta_slack") - sos::AffineExpr(o.beta_max));
  return beta;
}

// V fixed: maximize beta over the multipliers. The shape constraint is
// written divided by the degree-0 multiplier s6, t = 1 / s6, which makes it
// linear in beta:  (p - beta) - t (V - 1) - lambda2'g.
MultiplierStep multiplier_step(const PolySystem& sys, const Polynomial& V, const Polynomial& p,
                               const std::optional<Polynomial>& V_next, const CertifyOptions& o) {
  const int n = sys.nvars();
  SosProgram prog(n);
  const sos::AffineExpr beta = capped_beta(prog, o);
  const sos::AffineExpr t = prog.new_nonnegative_scalar("t");
  const PolyExpr one_minus_V = fixed(Polynomial::constant(n, 1.0) - V);

  PolyExpr shape = fixed(p) - PolyExpr::constant(n, beta) + PolyExpr::constant(n, t) * one_minus_V;
  if (!sys.g.empty()) shape -= sos::lambda_dot_g(lambda_vector(prog, sys, "lambda2", o.degrees.lambda), sys.g, n);
  add_scaled(prog, "shape", shape);

  const PolyExpr s8 = prog.new_sos_multiplier("s8", o.degrees.s8, o.degrees.s8 > 0);
  const Polynomial vdot = csos::lie_derivative(V, sys.f) + l_term(sys, o.l_epsilon);
  PolyExpr decrease = -(s8 * one_minus_V) - fixed(vdot);
  if (!sys.g.empty()) {
    decrease -= sos::lambda_dot_g(lambda_vector(prog, sys, "lambda3", o.degrees.lambda_decrease), sys.g, n);
  }
  add_scaled(prog, "decrease", decrease);

  PolyExpr s13(n);
  if (V_next) {
    s13 = prog.new_sos_multiplier("s13", o.degrees.s13);
    add_all(prog, "successor", successor_constraint(prog, sys, fixed(V), s13, *V_next, o));
  }
  prog.set_objective(sos::Sense::kMaximize, beta);
  const Attempt a = solve(prog, o, true);
  MultiplierStep out;
  if (!a.ok) return out;
  out.ok = true;
  out.beta = a.result.value(beta);
  out.t = a.result.value(t);
  out.s8 = a.result.value(s8);
  if (V_next) out.s13 = a.result.value(s13).constant_term();
  out.residual = a.result.sdp.residuals.max();
  if (!(out.t > 0.0)) out.ok = false;
  return out;
}

struct ShapeStep {
  bool ok = false;
  double beta = 0.0;
  Polynomial V;
  double residual = 0.0;
};

// Multipliers fixed (s2 = s9 = 1): maximize beta over V, or with
// beta_target > 0 find a V reaching that beta.
ShapeStep shape_step(const PolySystem& sys, const Polynomial& p, const MultiplierStep& m,
                     const std::optional<Polynomial>& V_next, const CertifyOptions& o, double beta_target = 0.0) {
  const int n = sys.nvars();
  SosProgram prog(n);
  const sos::AffineExpr beta = beta_target > 0.0 ? sos::AffineExpr(beta_target) : capped_beta(prog, o);
  PsatzOperands ops;
  ops.g = sys.g;
  const PolyExpr V = prog.new_free_polynomial("V", v_monomials(sys, o.degrees.V));
  ops.V = V;
  ops.Vdot = lie_derivative(V, sys.f) + fixed(l_term(sys, o.l_epsilon));
  ops.p = fixed(p);
  ops.beta = PolyExpr::constant(n, beta);
  ops.l1 = fixed(l_term(sys, o.l_epsilon));
  ops.s[2] = fixed_constant(n, 1.0);
  ops.s[6] = fixed_constant(n, 1.0 / m.t);
  ops.s[8] = fixed(m.s8);
  ops.s[9] = fixed_constant(n, 1.0);
  if (!sys.g.empty()) {
    ops.lambda[1] = lambda_vector(prog, sys, "lambda1", o.degrees.lambda);
    ops.lambda[2] = lambda_vector(prog, sys, "lambda2", o.degrees.lambda);
    ops.lambda[3] = lambda_vector(prog, sys, "lambda3", o.degrees.lambda_decrease);
  }
  add_all(prog, "expand", sos::assemble_psatz_constraint(PsatzTemplate::kExpandInterior, ops));
  if (V_next) add_all(prog, "successor", successor_constraint(prog, sys, V, fixed_constant(n, m.s13), *V_next, o));
  if (beta_target <= 0.0) prog.set_objective(sos::Sense::kMaximize, beta);
  const Attempt a = solve(prog, o, true);
  ShapeStep out;
  if (!a.ok) return out;
  out.ok = true;
  out.beta = a.result.value(beta);
  out.V = a.result.value(V);
  out.V.prune(0.0);
  out.residual = a.result.sdp.residuals.max();
  return out;
}

constexpr double kBackoff = 0.95;

double param_bound(const PolySystem& sys, int i, const CertifyOptions& o) {
  if (sys.angles == 0) return o.max_radius;
  return i < sys.angles ? M_PI * (1.0 - 1e-9) : o.max_speed;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

sdp::SolveOptions CertifyOptions::default_sdp_options() {
  // Anything short of a converged solve counts as infeasible, so stalled
  // infeasible instances are cut off early.
  sdp::SolveOptions o = SosProgram::default_solve_options();
  o.max_iterations = 60;
  o.stall_iterations = 12;
  return o;
}

Eigen::VectorXd PolySystem::lift(const Eigen::VectorXd& u) const {
  if (angles == 0) return u;
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(angles);
  return psys::to_chart(origin, u);
}

PolySystem PolySystem::from_recast(const psys::RecastSystem& rs) {
  PolySystem s;
  s.f = rs.f;
  s.g = rs.g;
  // The constant terms are the equilibrium residual (<= 1e-10); dropping them
  // makes the chart origin an exact equilibrium.
  for (auto& fi : s.f) fi.add_term(Exponent(fi.nvars(), 0), -fi.constant_term());
  s.angles = rs.m;
  return s;
}

Polynomial shape_function(const PolySystem& sys) {
  const int n = sys.nvars();
  std::vector<int> tangent;
  if (sys.angles == 0) {
    for (int k = 0; k < n; ++k) tangent.push_back(k);
  } else {
    for (int i = 0; i < sys.angles; ++i) tangent.push_back(i);
    for (int i = 0; i < sys.angles; ++i) tangent.push_back(sys.angles + 2 * i);
  }
  const int d = static_cast<int>(tangent.size());
  Eigen::MatrixXd A(d, d);
  for (int r = 0; r < d; ++r) {
    const Polynomial& fr = sys.f[tangent[r]];
    for (int c = 0; c < d; ++c) {
      Exponent e(n, 0);
      e[tangent[c]] = 1;
      A(r, c) = fr.coeff(e);
    }
  }
  const Eigen::VectorXcd ev = A.eigenvalues();
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (!(ev(k).real() < 0.0)) throw CertificationError("linearization is not Hurwitz");
  }
  // A'P + PA = -I as (I (x) A' + A' (x) I) vec(P) = -vec(I).
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(d * d, d * d);
  const Eigen::MatrixXd At = A.transpose();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      K.block(i * d, j * d, d, d) += I(i, j) * At;
      K.block(i * d, j * d, d, d) += At(i, j) * I;
    }
  }
  const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(I.data(), d * d);
  const Eigen::VectorXd vecP = K.fullPivLu().solve(rhs);
  Eigen::MatrixXd P = Eigen::Map<const Eigen::MatrixXd>(vecP.data(), d, d);
  P = 0.5 * (P + P.transpose());

  Polynomial p(n);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) {
      Exponent e(n, 0);
      ++e[tangent[r]];
      ++e[tangent[c]];
      p.add_term(e, P(r, c));
    }
  }
  for (int i = 0; i < sys.angles; ++i) {
    Exponent e(n, 0);
    e[sys.angles + 2 * i + 1] = 2;
    p.add_term(e, 1.0);
  }
  return p;
}

InitialEstimate initial_estimate(const PolySystem& sys, const Polynomial& p, const CertifyOptions& o) {
  InitialEstimate out;
  PolyExpr V;
  auto attempt = [&](double beta, Polynomial* V_found) {
    ++out.solves;
    const Attempt a = initial_at(sys, p, beta, o, &V);
    if (a.ok) {
      *V_found = a.result.value(V);
      out.residual = std::max(out.residual, a.result.sdp.residuals.max());
    }
    return a.ok;
  };
  Polynomial best;
  if (!attempt(o.beta_min, &best)) throw CertificationError("no certificate at requested degree");
  double lo = o.beta_min;
  double hi = o.beta_max;
  Polynomial trial;
  if (attempt(hi, &trial)) {
    lo = hi;
    best = trial;
  } else {
    for (int k = 0; k < o.bisection_steps; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (attempt(mid, &trial)) {
        lo = mid;
        best = trial;
      } else {
        hi = mid;
      }
    }
  }
  best.prune(0.0);
  out.V = normalized(best);
  out.beta = lo;
  return out;
}

Containment local_containment(const PolySystem& sys, const Polynomial& V, const Polynomial& p, double beta,
                              const std::optional<Polynomial>& V_next, const CertifyOptions& o) {
  Containment out;
  auto attempt = [&](double c) {
    ++out.solves;
    const Attempt a = containment_at(sys, V, p, beta, V_next, c, o);
    if (a.ok) out.residual = std::max(out.residual, a.result.sdp.residuals.max());
    return a.ok;
  };
  if (!attempt(o.c_min)) throw CertificationError("containment impossible at this degree");
  double lo = o.c_min;
  double hi = o.c_max;
  if (attempt(hi)) {
    lo = hi;
  } else {
    for (int k = 0; k < o.bisection_steps; ++k) {
      const double mid = 0.5 * (lo + hi);
      (attempt(mid) ? lo : hi) = mid;
    }
  }
  out.c = lo;
  out.V = scale(V, 1.0 / lo);
  return out;
}

Expansion expand_interior(const PolySystem& sys, const Polynomial& V_seed, const Polynomial& p0,
                          const std::optional<Polynomial>& V_next, const CertifyOptions& o) {
  Expansion out;
  out.V = V_seed;
  out.p = p0;
  Polynomial p = p0;
  for (int outer = 0; outer < o.max_outer; ++outer) {
    double beta_prev = -1.0;
    bool progressed = false;
    for (int inner = 0; inner < o.max_inner; ++inner) {
      const MultiplierStep m = multiplier_step(sys, out.V, p, V_next, o);
      if (!m.ok) {
        out.note = "multiplier step infeasible";
        break;
      }
      ShapeStep s = shape_step(sys, p, m, V_next, o);
      ++out.inner;
      if (!s.ok) {
        out.note = "shape step infeasible";
        break;
      }
      // The maximizer sits on the boundary of the feasible V; stepping back
      // to a fraction of the gain keeps the next multiplier step solvable.
      if (s.beta > m.beta) {
        const ShapeStep inner_point = shape_step(sys, p, m, V_next, o, m.beta + kBackoff * (s.beta - m.beta));
        if (inner_point.ok) s = inner_point;
      }
      const double base = beta_prev < 0.0 ? m.beta : std::max(beta_prev, m.beta);
      if (s.beta < base * (1.0 - 1e-6)) {
        out.note = "beta decreased";
        break;
      }
      if (s.beta < base) break;
      out.V = s.V;
      out.p = p;
      out.beta = s.beta;
      out.history.push_back(s.beta);
      out.residual = std::max({out.residual, m.residual, s.residual});
      progressed = true;
      const double previous = beta_prev < 0.0 ? m.beta : beta_prev;
      beta_prev = s.beta;
      if (s.beta - previous <= o.expand_tolerance * std::abs(previous)) break;
    }
    ++out.outer;
    if (!progressed) break;
    // With p the previous V, beta = 1 means the region stopped growing.
    if (outer > 0 && out.beta - 1.0 <= o.expand_tolerance) break;
    p = out.V;
  }
  return out;
}

double inscribed_level(const PolySystem& sys, const Polynomial& V, const Polynomial& p, const CertifyOptions& o) {
  const int n = sys.nvars();
  SosProgram prog(n);
  const sos::AffineExpr beta = prog.new_free_scalar("beta");
  const sos::AffineExpr t = prog.new_nonnegative_scalar("t");
  PolyExpr shape = fixed(p) - PolyExpr::constant(n, beta) +
                   PolyExpr::constant(n, t) * fixed(Polynomial::constant(n, 1.0) - V);
  if (!sys.g.empty()) shape -= sos::lambda_dot_g(lambda_vector(prog, sys, "lambda", o.degrees.lambda), sys.g, n);
  add_scaled(prog, "shape", shape);
  prog.set_objective(sos::Sense::kMaximize, beta);
  const Attempt a = solve(prog, o, true);
  return a.ok ? std::max(0.0, a.result.value(beta)) : 0.0;
}

std::vector<Eigen::VectorXd> sample_sublevel(const PolySystem& sys, const Polynomial& V, int count,
                                             std::mt19937_64& rng, const CertifyOptions& o) {
  const int d = sys.param_dim();
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  auto level = [&](const Eigen::VectorXd& u) { return eval(V, sys.lift(u)); };
  int misses = 0;
  while (static_cast<int>(out.size()) < count) {
    Eigen::VectorXd dir(d);
    for (int i = 0; i < d; ++i) dir(i) = normal(rng);
    if (dir.norm() == 0.0) continue;
    dir.normalize();
    double rb = std::numeric_limits<double>::infinity();
    for (int i = 0; i < d; ++i) {
      if (dir(i) != 0.0) rb = std::min(rb, param_bound(sys, i, o) / std::abs(dir(i)));
    }
    constexpr int kScan = 400;
    double lo = rb;
    for (int k = 1; k <= kScan; ++k) {
      const double r = rb * k / kScan;
      if (level(r * dir) > 1.0) {
        double a = rb * (k - 1) / kScan, b = r;
        for (int it = 0; it < 60 && b - a > 1e-12 * b; ++it) {
          const double mid = 0.5 * (a + b);
          (level(mid * dir) > 1.0 ? b : a) = mid;
        }
        lo = a;
        break;
      }
    }
    const double r = lo * std::pow(unit(rng), 1.0 / d);
    const Eigen::VectorXd z = sys.lift(r * dir);
    if (r > 0.0 && z.norm() > 0.0 && eval(V, z) <= 1.0) {
      out.push_back(z);
    } else if (++misses > 100 * count) {
      throw CertificationError("sublevel sampling failed");
    }
  }
  return out;
}

SampleCheck check_certificate(const PolySystem& sys, const Polynomial& V, const std::optional<Polynomial>& V_next,
                              int count, std::uint64_t seed, const CertifyOptions& o) {
  std::mt19937_64 rng(seed);
  const Polynomial vdot = csos::lie_derivative(V, sys.f);
  SampleCheck c;
  c.max_successor = -std::numeric_limits<double>::infinity();
  for (const auto& z : sample_sublevel(sys, V, count, rng, o)) {
    ++c.samples;
    if (!(eval(V, z) > 0.0)) ++c.positivity_violations;
    if (!(eval(vdot, z) < 0.0)) ++c.decrease_violations;
    if (V_next) {
      const double vn = eval(*V_next, z);
      c.max_successor = std::max(c.max_successor, vn);
      if (!(vn <= 1.0 + o.sample_tolerance)) ++c.nesting_violations;
    }
  }
  if (!V_next) c.max_successor = 0.0;
  return c;
}

std::map<int, StageModel> build_stage_models(const psys::NetworkModel& net) {
  const int n = static_cast<int>(net.rg_units.size());
  std::map<int, StageModel> out;
  Eigen::VectorXd guess;
  for (int id = 1; id <= (1 << n); ++id) {
    StageModel m;
    m.system = psys::reduce(net, SwitchingState::from_id(id, n));
    if (guess.size() == 0) guess = Eigen::VectorXd::Zero(m.system.num_machines() - 1);
    const auto sep = psys::solve_sep(m.system, guess);
    if (!sep.stable) {
      throw CertificationError("state " + std::to_string(id) + ": equilibrium is not stable");
    }
    m.system.sep = sep.delta;
    if (id == 1) guess = sep.delta;
    m.recast = psys::recast(m.system);
    out.emplace(id, std::move(m));
  }
  return out;
}

std::optional<LyapunovCertificate> StageCache::find(const std::vector<int>& suffix, std::string* failure) const {
  std::lock_guard<std::mutex> lock(mutex_);
  if (auto it = done_.find(suffix); it != done_.end()) return it->second;
  if (auto it = failed_.find(suffix); it != failed_.end() && failure) *failure = it->second;
  return std::nullopt;
}

void StageCache::store(const std::vector<int>& suffix, const LyapunovCertificate& cert) {
  std::lock_guard<std::mutex> lock(mutex_);
  done_[suffix] = cert;
}

void StageCache::store_failure(const std::vector<int>& suffix, const std::string& reason) {
  std::lock_guard<std::mutex> lock(mutex_);
  failed_[suffix] = reason;
}

LyapunovCertificate certify_stage(const StageModel& model, int state_id, int num_units,
                                  const LyapunovCertificate* successor, const StageModel* successor_model,
                                  const CertifyOptions& o) {
  const PolySystem sys = PolySystem::from_recast(model.recast);
  const Polynomial p0 = shape_function(sys);
  std::optional<Polynomial> V_next;
  if (successor) {
    const auto map = psys::chart_map(model.system.sep, successor_model->system.sep);
    V_next = compose_affine(successor->V, map.A, map.b);
    if (!(eval(*V_next, Eigen::VectorXd::Zero(sys.nvars())) < 1.0)) {
      throw CertificationError("equilibrium lies outside the successor region");
    }
  }
  LyapunovCertificate cert;
  cert.state_id = state_id;
  cert.num_units = num_units;
  cert.sep = model.system.sep;
  cert.successor = successor ? successor->state_id : 0;
  auto& d = cert.diagnostics;

  const InitialEstimate init = initial_estimate(sys, p0, o);
  d.initial_solves = init.solves;
  d.beta_initial = init.beta;
  const Containment cont = local_containment(sys, init.V, p0, init.beta, V_next, o);
  d.containment_solves = cont.solves;
  d.c = cont.c;
  const Expansion exp = expand_interior(sys, cont.V, p0, V_next, o);
  d.expand_inner = exp.inner;
  d.expand_outer = exp.outer;
  d.beta_expand = exp.beta;
  d.note = exp.note;
  d.max_residual = std::max({init.residual, cont.residual, exp.residual});

  cert.V = scale(exp.V, 1.0 + o.margin);
  cert.beta_achieved = inscribed_level(sys, cert.V, p0, o);
  const std::uint64_t seed = o.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(state_id * 64 + cert.successor));
  d.check = check_certificate(sys, cert.V, V_next, o.samples, seed, o);
  if (!d.check.passed()) {
    throw CertificationError("sampling check failed: " + std::to_string(d.check.positivity_violations) +
                             " positivity, " + std::to_string(d.check.decrease_violations) + " decrease, " +
                             std::to_string(d.check.nesting_violations) + " nesting violations");
  }
  return cert;
}

ChainCertificate certify_sequence(const cascade::CascadeSequence& seq, const std::map<int, StageModel>& models,
                                  const CertifyOptions& o, StageCache* cache) {
  ChainCertificate chain;
  chain.name = seq.name();
  chain.num_units = seq.num_units;
  chain.state_ids = seq.state_ids();
  const auto& ids = chain.state_ids;
  for (int k = static_cast<int>(ids.size()) - 1; k >= 0; --k) {
    const std::vector<int> suffix(ids.begin() + k, ids.end());
    const auto model = models.find(ids[k]);
    if (model == models.end()) throw std::invalid_argument("no model for state " + std::to_string(ids[k]));
    std::string failure;
    std::optional<LyapunovCertificate> cert;
    if (cache) cert = cache->find(suffix, &failure);
    if (!cert && failure.empty()) {
      const LyapunovCertificate* succ = chain.stages.empty() ? nullptr : &chain.stages.back();
      const StageModel* succ_model = succ ? &models.at(succ->state_id) : nullptr;
      try {
        cert = certify_stage(model->second, ids[k], seq.num_units, succ, succ_model, o);
        if (cache) cache->store(suffix, *cert);
      } catch (const CertificationError& e) {
        failure = e.what();
        if (cache) cache->store_failure(suffix, failure);
      }
    }
    if (!cert) {
      chain.certified = false;
      chain.failing_state = ids[k];
      chain.reason = failure;
      return chain;
    }
    chain.stages.push_back(*cert);
  }
  chain.certified = true;
  return chain;
}

ChainSet certify_all(const std::vector<cascade::CascadeSequence>& sequences, const std::map<int, StageModel>& models,
                     const CertifyOptions& o, int jobs) {
  StageCache cache;
  std::vector<ChainCertificate> out(sequences.size());
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (size_t k = next++; k < sequences.size(); k = next++) {
      try {
        out[k] = certify_sequence(sequences[k], models, o, &cache);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(sequences.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  ChainSet set;
  for (size_t k = 0; k < sequences.size(); ++k) set.emplace(sequences[k].trip_order, std::move(out[k]));
  return set;
}

double innermost_level(const ChainCertificate& chain, const Eigen::VectorXd& state) {
  if (!chain.certified) return std::numeric_limits<double>::infinity();
  const auto& c = chain.innermost();
  return eval(c.V, psys::to_chart(c.sep, state));
}

void write_chain(std::ostream& out, const ChainCertificate& chain) {
  out << "certificate_chain " << chain.name << "\n";
  out << "units " << chain.num_units << "\n";
  out << "states";
  for (int id : chain.state_ids) out << " " << id;
  out << "\n";
  if (chain.certified) {
    out << "status certified\n";
  } else {
    out << "status uncertifiable " << chain.failing_state << " " << chain.reason << "\n";
  }
  for (const auto& s : chain.stages) {
    const auto& d = s.diagnostics;
    out << "stage " << s.state_id << " successor " << s.successor << "\n";
    out << "sep";
    for (Eigen::Index i = 0; i < s.sep.size(); ++i) out << " " << fmt(s.sep(i));
    out << "\n";
    out << "V " << to_string(s.V) << "\n";
    out << "beta " << fmt(s.beta_achieved) << "\n";
    out << "diagnostics initial_solves=" << d.initial_solves << " containment_solves=" << d.containment_solves
        << " expand_inner=" << d.expand_inner << " expand_outer=" << d.expand_outer
        << " beta_initial=" << fmt(d.beta_initial) << " c=" << fmt(d.c) << " beta_expand=" << fmt(d.beta_expand)
        << " max_residual=" << fmt(d.max_residual) << " samples=" << d.check.samples
        << " max_successor=" << fmt(d.check.max_successor) << "\n";
    out << "end\n";
  }
}

ChainCertificate read_chain(std::istream& in) {
  ChainCertificate chain;
  std::string line;
  auto fail = [](const std::string& what) { throw std::invalid_argument("certificate chain: " + what); };
  LyapunovCertificate* cur = nullptr;
  auto value_of = [](const std::string& kv, const std::string& key, double& v) {
    if (kv.rfind(key + "=", 0) == 0) v = std::stod(kv.substr(key.size() + 1));
  };
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key) || key[0] == '#') continue;
    if (key == "certificate_chain") {
      ls >> chain.name;
    } else if (key == "units") {
      ls >> chain.num_units;
    } else if (key == "states") {
      int id;
      while (ls >> id) chain.state_ids.push_back(id);
    } else if (key == "status") {
      std::string st;
      ls >> st;
      chain.certified = st == "certified";
      if (!chain.certified) {
        ls >> chain.failing_state;
        std::getline(ls >> std::ws, chain.reason);
      }
    } else if (key == "stage") {
      chain.stages.emplace_back();
      cur = &chain.stages.back();
      std::string word;
      ls >> cur->state_id >> word >> cur->successor;
      cur->num_units = chain.num_units;
    } else if (!cur) {
      fail("'" + key + "' before any stage");
    } else if (key == "sep") {
      std::vector<double> v;
      double x;
      while (ls >> x) v.push_back(x);
      cur->sep = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    } else if (key == "V") {
      std::string text;
      std::getline(ls >> std::ws, text);
      cur->V = parse_polynomial(text, 3 * static_cast<int>(cur->sep.size()));
    } else if (key == "beta") {
      ls >> cur->beta_achieved;
    } else if (key == "diagnostics") {
      std::string kv;
      auto& d = cur->diagnostics;
      while (ls >> kv) {
        double v = std::numeric_limits<double>::quiet_NaN();
        for (const char* k : {"initial_solves", "containment_solves", "expand_inner", "expand_outer", "samples"}) {
          value_of(kv, k, v);
          if (!std::isnan(v)) {
            const int iv = static_cast<int>(v);
            const std::string name = k;
            if (name == "initial_solves") d.initial_solves = iv;
            if (name == "containment_solves") d.containment_solves = iv;
            if (name == "expand_inner") d.expand_inner = iv;
            if (name == "expand_outer") d.expand_outer = iv;
            if (name == "samples") d.check.samples = iv;
            break;
          }
        }
        value_of(kv, "beta_initial", d.beta_initial);
        value_of(kv, "c", d.c);
        value_of(kv, "beta_expand", d.beta_expand);
        value_of(kv, "max_residual", d.max_residual);
        value_of(kv, "max_successor", d.check.max_successor);
      }
    } else if (key == "end") {
      cur = nullptr;
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (chain.name.empty()) fail("missing header");
  return chain;
}

}  // namespace csos::certify
