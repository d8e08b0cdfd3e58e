#include <cmath>

#include "csos/psys.hpp"

namespace csos::psys {

namespace {

// Angles of all machines with the reference appended at 0.
Eigen::VectorXd full_angles(const ReducedSystem& sys, const Eigen::VectorXd& delta) {
  if (delta.size() != sys.dim()) {
    throw std::invalid_argument("expected " + std::to_string(sys.dim()) + " relative angles");
  }
  Eigen::VectorXd a = Eigen::VectorXd::Zero(sys.num_machines());
  a.head(sys.dim()) = delta;
  return a;
}

}  // namespace

Eigen::VectorXd electrical_power(const ReducedSystem& sys, const Eigen::VectorXd& delta) {
  const Eigen::VectorXd a = full_angles(sys, delta);
  const int n = sys.num_machines();
  Eigen::VectorXd pe(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = a(i) - a(j);
      s += sys.E(i) * sys.E(j) * (sys.G(i, j) * std::cos(d) + sys.B(i, j) * std::sin(d));
    }
    pe(i) = s;
  }
  return pe;
}

Eigen::VectorXd mismatch(const ReducedSystem& sys, const Eigen::VectorXd& delta) {
  const Eigen::VectorXd pe = electrical_power(sys, delta);
  const int n = sys.num_machines();
  const double ref = (sys.Pm(n - 1) - pe(n - 1)) / sys.M(n - 1);
  Eigen::VectorXd f(sys.dim());
  for (int i = 0; i < sys.dim(); ++i) f(i) = (sys.Pm(i) - pe(i)) / sys.M(i) - ref;
  return f;
}

Eigen::MatrixXd mismatch_jacobian(const ReducedSystem& sys, const Eigen::VectorXd& delta) {
  const Eigen::VectorXd a = full_angles(sys, delta);
  const int n = sys.num_machines();
  const int m = sys.dim();
  // dPe(i, k) = d Pe_i / d delta_k for k < m.
  Eigen::MatrixXd dPe = Eigen::MatrixXd::Zero(n, m);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < m; ++k) {
      if (k == i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const double d = a(i) - a(j);
          s += sys.E(i) * sys.E(j) * (-sys.G(i, j) * std::sin(d) + sys.B(i, j) * std::cos(d));
        }
        dPe(i, k) = s;
      } else {
        const double d = a(i) - a(k);
        dPe(i, k) = sys.E(i) * sys.E(k) * (sys.G(i, k) * std::sin(d) - sys.B(i, k) * std::cos(d));
      }
    }
  }
  Eigen::MatrixXd J(m, m);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < m; ++k) J(i, k) = -dPe(i, k) / sys.M(i) + dPe(n - 1, k) / sys.M(n - 1);
  }
  return J;
}

SepResult solve_sep(const ReducedSystem& sys, const Eigen::VectorXd& guess, int max_iterations,
                    double tolerance) {
  SepResult out;
  Eigen::VectorXd x = guess;
  Eigen::VectorXd f = mismatch(sys, x);
  for (int it = 0; it <= max_iterations; ++it) {
    out.iterations = it;
    if (f.lpNorm<Eigen::Infinity>() <= tolerance) break;
    if (it == max_iterations) {
      throw std::runtime_error("solve_sep: no convergence in " + std::to_string(max_iterations) +
                               " iterations (residual " + std::to_string(f.lpNorm<Eigen::Infinity>()) +
                               ")");
    }
    const Eigen::MatrixXd J = mismatch_jacobian(sys, x);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (!lu.isInvertible()) throw std::runtime_error("solve_sep: singular Jacobian");
    const Eigen::VectorXd step = lu.solve(-f);
    // Backtracking on the residual norm.
    double t = 1.0;
    Eigen::VectorXd xn = x + step;
    Eigen::VectorXd fn = mismatch(sys, xn);
    for (int k = 0; k < 20 && fn.norm() > (1.0 - 1e-4 * t) * f.norm(); ++k) {
      t *= 0.5;
      xn = x + t * step;
      fn = mismatch(sys, xn);
    }
    x = xn;
    f = fn;
  }
  out.delta = x;
  out.residual = f.lpNorm<Eigen::Infinity>();
  ReducedSystem at = sys;
  at.sep = x;
  const Eigen::VectorXcd ev = linearization(at).eigenvalues();
  out.stable = ev.real().maxCoeff() < 0.0;
  return out;
}

Eigen::VectorXd vector_field(const ReducedSystem& sys, const Eigen::VectorXd& state) {
  const int m = sys.dim();
  if (state.size() != 2 * m) throw std::invalid_argument("vector_field: state dimension mismatch");
  Eigen::VectorXd out(2 * m);
  const Eigen::VectorXd w = state.tail(m);
  out.head(m) = w;
  out.tail(m) = mismatch(sys, state.head(m)) - sys.lambda * w;
  return out;
}

Eigen::MatrixXd linearization(const ReducedSystem& sys) {
  const int m = sys.dim();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  A.topRightCorner(m, m).setIdentity();
  A.bottomLeftCorner(m, m) = mismatch_jacobian(sys, sys.sep);
  A.bottomRightCorner(m, m) = -sys.lambda * Eigen::MatrixXd::Identity(m, m);
  return A;
}

RecastSystem recast(const ReducedSystem& sys) {
  const int m = sys.dim();
  const int n = sys.num_machines();
  if (sys.sep.size() != m) throw std::invalid_argument("recast: SEP not set");
  RecastSystem rs;
  rs.m = m;
  const int nv = rs.nvars();
  // sin/cos of theta_i = delta_i - sep_i; the reference has theta = 0.
  std::vector<Polynomial> sn(n, Polynomial(nv)), cs(n, Polynomial::constant(nv, 1.0));
  for (int i = 0; i < m; ++i) {
    sn[i] = Polynomial::variable(nv, rs.sin_index(i));
    cs[i] = Polynomial::constant(nv, 1.0) - Polynomial::variable(nv, rs.cos_index(i));
  }
  Eigen::VectorXd sep = Eigen::VectorXd::Zero(n);
  sep.head(m) = sys.sep;
  std::vector<Polynomial> pe(n, Polynomial(nv));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double k = sys.E(i) * sys.E(j);
      if (i == j) {
        pe[i] += Polynomial::constant(nv, k * sys.G(i, i));
        continue;
      }
      const double d = sep(i) - sep(j);
      const Polynomial s_th = sn[i] * cs[j] - cs[i] * sn[j];
      const Polynomial c_th = cs[i] * cs[j] + sn[i] * sn[j];
      const Polynomial s_d = std::cos(d) * s_th + std::sin(d) * c_th;
      const Polynomial c_d = std::cos(d) * c_th - std::sin(d) * s_th;
      pe[i] += k * sys.G(i, j) * c_d + k * sys.B(i, j) * s_d;
    }
  }
  const Polynomial ref = (1.0 / sys.M(n - 1)) * (Polynomial::constant(nv, sys.Pm(n - 1)) - pe[n - 1]);
  rs.f.assign(nv, Polynomial(nv));
  rs.g.assign(m, Polynomial(nv));
  for (int i = 0; i < m; ++i) {
    const Polynomial w = Polynomial::variable(nv, RecastSystem::speed(i));
    const Polynomial s = Polynomial::variable(nv, rs.sin_index(i));
    const Polynomial c = Polynomial::variable(nv, rs.cos_index(i));
    rs.f[RecastSystem::speed(i)] =
        (1.0 / sys.M(i)) * (Polynomial::constant(nv, sys.Pm(i)) - pe[i]) - ref - sys.lambda * w;
    rs.f[rs.sin_index(i)] = cs[i] * w;
    rs.f[rs.cos_index(i)] = s * w;
    rs.g[i] = s * s + c * c - 2.0 * c;
  }
  return rs;
}

Eigen::VectorXd to_chart(const Eigen::VectorXd& sep, const Eigen::VectorXd& state) {
  const int m = static_cast<int>(sep.size());
  if (state.size() != 2 * m) throw std::invalid_argument("to_chart: state dimension mismatch");
  Eigen::VectorXd z(3 * m);
  for (int i = 0; i < m; ++i) {
    const double th = state(i) - sep(i);
    z(i) = state(m + i);
    z(m + 2 * i) = std::sin(th);
    z(m + 2 * i + 1) = 1.0 - std::cos(th);
  }
  return z;
}

Eigen::VectorXd from_chart(const Eigen::VectorXd& sep, const Eigen::VectorXd& z) {
  const int m = static_cast<int>(sep.size());
  if (z.size() != 3 * m) throw std::invalid_argument("from_chart: chart dimension mismatch");
  Eigen::VectorXd x(2 * m);
  for (int i = 0; i < m; ++i) {
    x(i) = sep(i) + std::atan2(z(m + 2 * i), 1.0 - z(m + 2 * i + 1));
    x(m + i) = z(i);
  }
  return x;
}

AffineMap chart_map(const Eigen::VectorXd& sep_from, const Eigen::VectorXd& sep_to) {
  const int m = static_cast<int>(sep_from.size());
  if (sep_to.size() != m) throw std::invalid_argument("chart_map: SEP dimension mismatch");
  AffineMap map;
  map.A = Eigen::MatrixXd::Zero(3 * m, 3 * m);
  map.b = Eigen::VectorXd::Zero(3 * m);
  map.A.topLeftCorner(m, m).setIdentity();
  for (int i = 0; i < m; ++i) {
    // theta_to = theta_from + d; expand sin and 1 - cos of the sum.
    const double d = sep_from(i) - sep_to(i);
    const double cd = std::cos(d), sd = std::sin(d);
    const int s = m + 2 * i, c = s + 1;
    map.A(s, s) = cd;
    map.A(s, c) = -sd;
    map.A(c, s) = sd;
    map.A(c, c) = cd;
    map.b(s) = sd;
    map.b(c) = 1.0 - cd;
  }
  return map;
}

}  // namespace csos::psys
