#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "csos/sdp.hpp"

// Primal-dual interior point method on the simplified homogeneous self-dual
// embedding, Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
// Free variables stay free; the Newton system is solved as a saddle point
// system [M F; F' 0] with the PSD Schur complement M.

namespace csos::sdp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Blocks = std::vector<MatrixXd>;

struct Entry {
  int row;
  int col;
  double value;
};

// Constraint i restricted to one block.
struct BlockRow {
  int constraint;
  std::vector<Entry> entries;
};

struct Problem {
  int m = 0;
  int nf = 0;
  std::vector<int> sizes;
  int total_order = 0;
  Blocks C;
  VectorXd cf;
  VectorXd b;
  MatrixXd F;                                 // m x nf
  std::vector<std::vector<BlockRow>> rows;    // per block
};

Problem build(const SdpInstance& inst) {
  Problem p;
  p.m = static_cast<int>(inst.constraints.size());
  p.nf = inst.free_vars;
  p.sizes = inst.psd_blocks;
  for (int n : p.sizes) {
    p.C.push_back(MatrixXd::Zero(n, n));
    p.total_order += n;
  }
  p.cf = VectorXd::Zero(p.nf);
  for (const auto& e : inst.objective.matrix_terms) {
    p.C[e.block](e.row, e.col) += e.value;
    if (e.row != e.col) p.C[e.block](e.col, e.row) += e.value;
  }
  for (const auto& [k, v] : inst.objective.free_terms) p.cf[k] += v;
  p.b.resize(p.m);
  p.F = MatrixXd::Zero(p.m, p.nf);
  p.rows.resize(p.sizes.size());
  for (int i = 0; i < p.m; ++i) {
    const auto& con = inst.constraints[i];
    p.b[i] = con.rhs;
    for (const auto& [k, v] : con.lhs.free_terms) p.F(i, k) += v;
    std::vector<std::vector<Entry>> per_block(p.sizes.size());
    for (const auto& e : con.lhs.matrix_terms) {
      const int r = std::min(e.row, e.col);
      const int c = std::max(e.row, e.col);
      per_block[e.block].push_back({r, c, e.value});
    }
    for (size_t blk = 0; blk < per_block.size(); ++blk) {
      if (!per_block[blk].empty()) {
        p.rows[blk].push_back({i, std::move(per_block[blk])});
      }
    }
  }
  return p;
}

double inner(const Blocks& a, const Blocks& b) {
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) s += a[k].cwiseProduct(b[k]).sum();
  return s;
}

double max_abs(const Blocks& a) {
  double m = 0.0;
  for (const auto& x : a) {
    if (x.size()) m = std::max(m, x.cwiseAbs().maxCoeff());
  }
  return m;
}

double max_abs(const VectorXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

// A(Y) restricted to the matrix part.
VectorXd apply_matrix_part(const Problem& p, const Blocks& Y) {
  VectorXd out = VectorXd::Zero(p.m);
  for (size_t blk = 0; blk < p.rows.size(); ++blk) {
    const MatrixXd& y = Y[blk];
    for (const auto& row : p.rows[blk]) {
      double s = 0.0;
      for (const auto& e : row.entries) {
        s += (e.row == e.col ? 1.0 : 2.0) * e.value * y(e.row, e.col);
      }
      out[row.constraint] += s;
    }
  }
  return out;
}

Blocks adjoint(const Problem& p, const VectorXd& y) {
  Blocks out;
  for (int n : p.sizes) out.push_back(MatrixXd::Zero(n, n));
  for (size_t blk = 0; blk < p.rows.size(); ++blk) {
    MatrixXd& o = out[blk];
    for (const auto& row : p.rows[blk]) {
      const double yi = y[row.constraint];
      if (yi == 0.0) continue;
      for (const auto& e : row.entries) {
        o(e.row, e.col) += yi * e.value;
        if (e.row != e.col) o(e.col, e.row) += yi * e.value;
      }
    }
  }
  return out;
}

// <A_i, W A_j W> accumulated into M for all constraint pairs sharing a block.
void add_schur_block(const std::vector<BlockRow>& rows, const MatrixXd& W,
                     MatrixXd& M) {
  const int k = static_cast<int>(rows.size());
  for (int a = 0; a < k; ++a) {
    const auto& ea = rows[a].entries;
    for (int bidx = a; bidx < k; ++bidx) {
      const auto& eb = rows[bidx].entries;
      double s = 0.0;
      for (const auto& e : ea) {
        for (const auto& f : eb) {
          const int r = e.row, c = e.col, r2 = f.row, c2 = f.col;
          double t;
          if (r != c && r2 != c2) {
            t = 2.0 * (W(r, r2) * W(c, c2) + W(r, c2) * W(c, r2));
          } else if (r == c && r2 != c2) {
            t = 2.0 * W(r, r2) * W(r, c2);
          } else if (r != c && r2 == c2) {
            t = 2.0 * W(r, r2) * W(c, r2);
          } else {
            t = W(r, r2) * W(r, r2);
          }
          s += e.value * f.value * t;
        }
      }
      const int i = rows[a].constraint;
      const int j = rows[bidx].constraint;
      M(i, j) += s;
      if (i != j) M(j, i) += s;
    }
  }
}

// Largest step keeping X + alpha dX positive semidefinite.
double max_step(const MatrixXd& X, const MatrixXd& dX) {
  if (X.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::LLT<MatrixXd> llt(X);
  const MatrixXd L = llt.matrixL();
  MatrixXd T = L.triangularView<Eigen::Lower>().solve(dX);
  T = L.triangularView<Eigen::Lower>().solve(T.transpose()).transpose();
  T = 0.5 * (T + T.transpose());
  const double lmin =
      Eigen::SelfAdjointEigenSolver<MatrixXd>(T, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .minCoeff();
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

double max_step_scalar(double v, double dv) {
  return dv < 0.0 ? -v / dv : std::numeric_limits<double>::infinity();
}

struct Scaling {
  MatrixXd G;       // W = G G'
  MatrixXd W;
  VectorXd lambda;  // G' S G = G^{-1} X G^{-T} = diag(lambda)
};

bool nt_scaling(const MatrixXd& X, const MatrixXd& S, Scaling& out) {
  Eigen::LLT<MatrixXd> lx(X), ls(S);
  if (lx.info() != Eigen::Success || ls.info() != Eigen::Success) return false;
  const MatrixXd LX = lx.matrixL();
  const MatrixXd LS = ls.matrixL();
  Eigen::JacobiSVD<MatrixXd> svd(LS.transpose() * LX,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
  out.lambda = svd.singularValues();
  if (out.lambda.minCoeff() <= 0.0) return false;
  out.G = LX * svd.matrixV() *
          out.lambda.cwiseSqrt().cwiseInverse().asDiagonal();
  out.W = out.G * out.G.transpose();
  return true;
}

struct Iterate {
  Blocks X, S;
  VectorXd x, y;
  double tau = 1.0, kappa = 1.0;
};

struct Direction {
  Blocks dX, dS;
  VectorXd dx, dy;
  double dtau = 0.0, dkappa = 0.0;
};

}  // namespace

double Residuals::max() const { return std::max({primal, dual, gap}); }

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal:
      return "optimal";
    case SolveStatus::kInfeasible:
      return "infeasible";
    case SolveStatus::kUnbounded:
      return "unbounded";
    case SolveStatus::kNumericalFailure:
      return "numerical_failure";
  }
  return "unknown";
}

void SdpInstance::validate() const {
  for (size_t k = 0; k < psd_blocks.size(); ++k) {
    if (psd_blocks[k] < 1) {
      throw std::invalid_argument("block " + std::to_string(k) +
                                  " has size < 1");
    }
  }
  if (free_vars < 0) throw std::invalid_argument("negative free_vars");
  auto check = [&](const LinearFunctional& f, const std::string& where) {
    for (const auto& e : f.matrix_terms) {
      if (e.block < 0 || e.block >= static_cast<int>(psd_blocks.size()) ||
          e.row < 0 || e.col < 0 || e.row >= psd_blocks[e.block] ||
          e.col >= psd_blocks[e.block]) {
        throw std::invalid_argument(where + " references undeclared block entry (" +
                                    std::to_string(e.block) + "," +
                                    std::to_string(e.row) + "," +
                                    std::to_string(e.col) + ")");
      }
    }
    for (const auto& [k, v] : f.free_terms) {
      if (k < 0 || k >= free_vars) {
        throw std::invalid_argument(where + " references undeclared free variable " +
                                    std::to_string(k));
      }
    }
  };
  check(objective, "objective");
  for (size_t i = 0; i < constraints.size(); ++i) {
    check(constraints[i].lhs, "constraint " + std::to_string(i));
  }
}

double evaluate(const LinearFunctional& f, const std::vector<MatrixXd>& blocks,
                const VectorXd& free_values) {
  double s = 0.0;
  for (const auto& e : f.matrix_terms) {
    s += (e.row == e.col ? 1.0 : 2.0) * e.value * blocks[e.block](e.row, e.col);
  }
  for (const auto& [k, v] : f.free_terms) s += v * free_values[k];
  return s;
}

SdpSolution solve(const SdpInstance& instance, const SolveOptions& opt) {
  instance.validate();
  const Problem p = build(instance);
  const int nb = static_cast<int>(p.sizes.size());
  const int m = p.m;
  const int nf = p.nf;
  const double nu = p.total_order + 1.0;

  Iterate it;
  for (int n : p.sizes) {
    it.X.push_back(MatrixXd::Identity(n, n));
    it.S.push_back(MatrixXd::Identity(n, n));
  }
  it.x = VectorXd::Zero(nf);
  it.y = VectorXd::Zero(m);

  SdpSolution sol;
  auto finish = [&](SolveStatus status, const std::string& msg) {
    sol.status = status;
    sol.message = msg;
    const double t = status == SolveStatus::kOptimal ||
                             status == SolveStatus::kNumericalFailure
                         ? it.tau
                         : 1.0;
    sol.block_values.clear();
    sol.dual_slack.clear();
    if (status == SolveStatus::kInfeasible) {
      const double by = p.b.dot(it.y);
      for (int k = 0; k < nb; ++k) {
        sol.block_values.push_back(MatrixXd::Zero(p.sizes[k], p.sizes[k]));
        sol.dual_slack.push_back(it.S[k] / by);
      }
      sol.free_values = VectorXd::Zero(nf);
      sol.dual_values = it.y / by;
    } else if (status == SolveStatus::kUnbounded) {
      const double cx = -(inner(p.C, it.X) + p.cf.dot(it.x));
      for (int k = 0; k < nb; ++k) {
        sol.block_values.push_back(it.X[k] / cx);
        sol.dual_slack.push_back(MatrixXd::Zero(p.sizes[k], p.sizes[k]));
      }
      sol.free_values = it.x / cx;
      sol.dual_values = VectorXd::Zero(m);
    } else {
      for (int k = 0; k < nb; ++k) {
        sol.block_values.push_back(it.X[k] / t);
        sol.dual_slack.push_back(it.S[k] / t);
      }
      sol.free_values = it.x / t;
      sol.dual_values = it.y / t;
    }
    sol.objective_value = inner(p.C, sol.block_values) +
                          p.cf.dot(sol.free_values) +
                          instance.objective_constant;
    sol.dual_objective = p.b.dot(sol.dual_values) + instance.objective_constant;
    return sol;
  };

  // Best iterate seen so far; near the optimum the Newton systems lose
  // accuracy and the residuals can grow again.
  Iterate best;
  Residuals best_res;
  double best_max = std::numeric_limits<double>::infinity();
  auto fail = [&](const std::string& msg) {
    if (opt.acceptable_tolerance > 0.0 && best_max <= opt.acceptable_tolerance) {
      it = best;
      sol.residuals = best_res;
      return finish(SolveStatus::kOptimal, "converged to reduced accuracy");
    }
    return finish(SolveStatus::kNumericalFailure, msg);
  };

  double stall_reference = std::numeric_limits<double>::infinity();
  int last_progress = 0;
  for (int iter = 0; iter <= opt.max_iterations; ++iter) {
    sol.iterations = iter;
    // Residuals of the homogeneous model.
    const VectorXd AX = apply_matrix_part(p, it.X);
    const VectorXd Rp = AX + p.F * it.x - p.b * it.tau;
    Blocks Rd = adjoint(p, it.y);
    for (int k = 0; k < nb; ++k) Rd[k] += it.S[k] - p.C[k] * it.tau;
    const VectorXd Rf = p.F.transpose() * it.y - p.cf * it.tau;
    const double cx = inner(p.C, it.X) + p.cf.dot(it.x);
    const double by = p.b.dot(it.y);
    const double Rg = cx - by + it.kappa;
    const double mu = (inner(it.X, it.S) + it.tau * it.kappa) / nu;

    const double pobj = cx / it.tau;
    const double dobj = by / it.tau;
    sol.residuals.primal = max_abs(Rp) / it.tau;
    sol.residuals.dual = std::max(max_abs(Rd), max_abs(Rf)) / it.tau;
    sol.residuals.gap =
        std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    if (opt.verbose) {
      std::fprintf(stderr,
                   "it %3d  pobj % .8e  dobj % .8e  pres %.2e  dres %.2e  "
                   "gap %.2e  tau %.2e  kappa %.2e  mu %.2e\n",
                   iter, pobj, dobj, sol.residuals.primal, sol.residuals.dual,
                   sol.residuals.gap, it.tau, it.kappa, mu);
    }
    if (sol.residuals.max() <= opt.tolerance) {
      return finish(SolveStatus::kOptimal, "converged");
    }
    if (sol.residuals.max() < best_max) {
      best_max = sol.residuals.max();
      best_res = sol.residuals;
      best = it;
    }
    if (by > 0.0) {
      Blocks ray = adjoint(p, it.y);
      for (int k = 0; k < nb; ++k) ray[k] += it.S[k];
      const double ray_res =
          std::max(max_abs(ray), max_abs(VectorXd(p.F.transpose() * it.y))) /
          by;
      if (ray_res <= opt.infeasibility_tolerance) {
        return finish(SolveStatus::kInfeasible,
                      "Farkas ray: b'y > 0 with A*(y) <= 0");
      }
    }
    if (cx < 0.0) {
      const double ray_res = max_abs(VectorXd(AX + p.F * it.x)) / -cx;
      if (ray_res <= opt.infeasibility_tolerance) {
        return finish(SolveStatus::kUnbounded,
                      "improving ray: A(X) + F x = 0 with <C,X> < 0");
      }
    }
    if (sol.residuals.max() < 0.5 * stall_reference) {
      stall_reference = sol.residuals.max();
      last_progress = iter;
    }
    if (opt.stall_iterations > 0 && iter - last_progress >= opt.stall_iterations) {
      return fail("stalled");
    }
    if (iter == opt.max_iterations) break;

    // Scaling and Schur complement.
    std::vector<Scaling> sc(nb);
    bool ok = true;
    for (int k = 0; k < nb; ++k) ok = ok && nt_scaling(it.X[k], it.S[k], sc[k]);
    if (!ok) return fail("lost positive definiteness");

    MatrixXd K = MatrixXd::Zero(m + nf, m + nf);
    {
      MatrixXd M = MatrixXd::Zero(m, m);
      for (int k = 0; k < nb; ++k) add_schur_block(p.rows[k], sc[k].W, M);
      K.topLeftCorner(m, m) = M;
    }
    K.topRightCorner(m, nf) = p.F;
    K.bottomLeftCorner(nf, m) = p.F.transpose();
    double diag_scale = 1.0;
    if (m > 0) diag_scale = std::max(1.0, K.topLeftCorner(m, m).diagonal().cwiseAbs().maxCoeff());
    MatrixXd Kreg = K;
    const double reg = 1e-13 * diag_scale;
    for (int i = 0; i < m; ++i) Kreg(i, i) += reg;
    for (int i = m; i < m + nf; ++i) Kreg(i, i) -= reg;
    // Block elimination through a Cholesky factor of M when every
    // constraint touches a PSD block; general LU otherwise.
    const auto Mreg = Kreg.topLeftCorner(m, m);
    bool use_llt = m > 0 && Mreg.diagonal().minCoeff() > 1e-10 * diag_scale;
    Eigen::LLT<MatrixXd> llt;
    Eigen::LDLT<MatrixXd> schur_f;
    MatrixXd MinvF;
    if (use_llt) {
      llt.compute(Mreg);
      use_llt = llt.info() == Eigen::Success;
      if (use_llt && nf > 0) {
        MinvF = llt.solve(p.F);
        schur_f.compute(p.F.transpose() * MinvF);
        use_llt = schur_f.info() == Eigen::Success;
      }
    }
    Eigen::PartialPivLU<MatrixXd> lu;
    if (!use_llt) lu.compute(Kreg);
    auto base_solve = [&](const VectorXd& rhs) -> VectorXd {
      if (!use_llt) return lu.solve(rhs);
      VectorXd out(m + nf);
      const VectorXd Mr = llt.solve(rhs.head(m));
      if (nf > 0) {
        const VectorXd b = schur_f.solve(VectorXd(p.F.transpose() * Mr - rhs.tail(nf)));
        out.tail(nf) = b;
        out.head(m) = Mr - MinvF * b;
      } else {
        out = Mr;
      }
      return out;
    };
    auto ksolve = [&](const VectorXd& rhs) {
      VectorXd sol_v = base_solve(rhs);
      for (int r = 0; r < 2; ++r) sol_v += base_solve(VectorXd(rhs - K * sol_v));
      return sol_v;
    };

    Blocks WCW(nb);
    for (int k = 0; k < nb; ++k) WCW[k] = sc[k].W * p.C[k] * sc[k].W;
    const VectorXd u = apply_matrix_part(p, WCW);
    const double cWc = inner(p.C, WCW);
    VectorXd rhs2(m + nf);
    rhs2 << p.b + u, p.cf;
    const VectorXd p2 = ksolve(rhs2);
    const double p2_dot =
        (u - p.b).dot(p2.head(m)) + p.cf.dot(p2.tail(nf));

    // Solves the Newton system for a given complementarity target.
    // Rmat[k] is the scaled target: Lambda o (dX~ + dS~) = Rmat.
    auto direction = [&](double eta, const Blocks& Rmat, double rc_tk) {
      Direction d;
      Blocks Rc(nb);
      for (int k = 0; k < nb; ++k) {
        const VectorXd& lam = sc[k].lambda;
        const int n = p.sizes[k];
        MatrixXd Z(n, n);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) Z(i, j) = 2.0 * Rmat[k](i, j) / (lam[i] + lam[j]);
        }
        Rc[k] = sc[k].G * Z * sc[k].G.transpose();
      }
      Blocks T(nb);
      for (int k = 0; k < nb; ++k) T[k] = Rc[k] + eta * sc[k].W * Rd[k] * sc[k].W;
      const VectorXd r1 = -eta * Rp - apply_matrix_part(p, T);
      const VectorXd r2 = -eta * Rf;
      const double r3 = -eta * Rg - inner(p.C, T) - rc_tk / it.tau;
      VectorXd rhs1(m + nf);
      rhs1 << r1, r2;
      const VectorXd p1 = ksolve(rhs1);
      const double denom = p2_dot - cWc - it.kappa / it.tau;
      d.dtau = (r3 - (u - p.b).dot(p1.head(m)) - p.cf.dot(p1.tail(nf))) / denom;
      const VectorXd sol_v = p1 + d.dtau * p2;
      d.dy = sol_v.head(m);
      d.dx = sol_v.tail(nf);
      d.dkappa = (rc_tk - it.kappa * d.dtau) / it.tau;
      Blocks ady = adjoint(p, d.dy);
      d.dS.resize(nb);
      d.dX.resize(nb);
      for (int k = 0; k < nb; ++k) {
        d.dS[k] = -eta * Rd[k] - ady[k] + p.C[k] * d.dtau;
        d.dS[k] = 0.5 * (d.dS[k] + d.dS[k].transpose());
        d.dX[k] = Rc[k] - sc[k].W * d.dS[k] * sc[k].W;
        d.dX[k] = 0.5 * (d.dX[k] + d.dX[k].transpose());
      }
      return d;
    };
    auto step_to_boundary = [&](const Direction& d) {
      double a = std::numeric_limits<double>::infinity();
      for (int k = 0; k < nb; ++k) {
        a = std::min(a, max_step(it.X[k], d.dX[k]));
        a = std::min(a, max_step(it.S[k], d.dS[k]));
      }
      a = std::min(a, max_step_scalar(it.tau, d.dtau));
      a = std::min(a, max_step_scalar(it.kappa, d.dkappa));
      return a;
    };

    // Predictor.
    Blocks Rmat(nb);
    for (int k = 0; k < nb; ++k) {
      Rmat[k] = -MatrixXd(sc[k].lambda.cwiseAbs2().asDiagonal());
    }
    const Direction aff = direction(1.0, Rmat, -it.tau * it.kappa);
    const double a_aff = std::min(1.0, step_to_boundary(aff));
    double mu_aff = (it.tau + a_aff * aff.dtau) * (it.kappa + a_aff * aff.dkappa);
    for (int k = 0; k < nb; ++k) {
      mu_aff += (it.X[k] + a_aff * aff.dX[k]).cwiseProduct(it.S[k] + a_aff * aff.dS[k]).sum();
    }
    mu_aff /= nu;
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    // Corrector with the second-order term in the scaled space.
    for (int k = 0; k < nb; ++k) {
      const MatrixXd Ginv = sc[k].G.inverse();
      const MatrixXd dXs = Ginv * aff.dX[k] * Ginv.transpose();
      const MatrixXd dSs = sc[k].G.transpose() * aff.dS[k] * sc[k].G;
      const MatrixXd prod = 0.5 * (dXs * dSs + dSs * dXs);
      Rmat[k] = sigma * mu * MatrixXd::Identity(p.sizes[k], p.sizes[k]) -
                MatrixXd(sc[k].lambda.cwiseAbs2().asDiagonal()) - prod;
    }
    const double rc_tk = sigma * mu - it.tau * it.kappa - aff.dtau * aff.dkappa;
    const Direction d = direction(1.0 - sigma, Rmat, rc_tk);
    const double amax = step_to_boundary(d);
    const double alpha = std::min(1.0, opt.step_fraction * amax);
    if (!(alpha > 1e-12)) {
      return fail("step length collapsed");
    }
    for (int k = 0; k < nb; ++k) {
      it.X[k] += alpha * d.dX[k];
      it.S[k] += alpha * d.dS[k];
    }
    it.x += alpha * d.dx;
    it.y += alpha * d.dy;
    it.tau += alpha * d.dtau;
    it.kappa += alpha * d.dkappa;
    if (!(it.tau > 0.0) || !(it.kappa > 0.0) || !std::isfinite(it.tau)) {
      return fail("homogenizing variable left the cone");
    }
  }
  return fail("iteration limit reached");
}

void write_instance(std::ostream& out, const SdpInstance& inst) {
  out.precision(17);
  out << "sdp " << inst.psd_blocks.size() << ' ' << inst.free_vars << ' '
      << inst.constraints.size() << '\n';
  out << "blocks";
  for (int n : inst.psd_blocks) out << ' ' << n;
  out << '\n';
  out << "objective_constant " << inst.objective_constant << '\n';
  auto dump = [&](const LinearFunctional& f, size_t idx) {
    for (const auto& e : f.matrix_terms) {
      out << "m " << idx << ' ' << e.block + 1 << ' ' << e.row + 1 << ' '
          << e.col + 1 << ' ' << e.value << '\n';
    }
    for (const auto& [k, v] : f.free_terms) {
      out << "f " << idx << ' ' << k + 1 << ' ' << v << '\n';
    }
  };
  dump(inst.objective, 0);
  for (size_t i = 0; i < inst.constraints.size(); ++i) {
    dump(inst.constraints[i].lhs, i + 1);
    out << "b " << i + 1 << ' ' << inst.constraints[i].rhs << '\n';
  }
}

SdpInstance read_instance(std::istream& in) {
  SdpInstance inst;
  std::string tag;
  size_t nblocks = 0, ncons = 0;
  if (!(in >> tag) || tag != "sdp") throw std::invalid_argument("missing 'sdp' header");
  in >> nblocks >> inst.free_vars >> ncons;
  in >> tag;
  if (tag != "blocks") throw std::invalid_argument("missing 'blocks' line");
  inst.psd_blocks.resize(nblocks);
  for (auto& n : inst.psd_blocks) in >> n;
  in >> tag >> inst.objective_constant;
  if (tag != "objective_constant") throw std::invalid_argument("missing objective_constant");
  inst.constraints.resize(ncons);
  auto target = [&](size_t idx) -> LinearFunctional& {
    if (idx == 0) return inst.objective;
    if (idx > ncons) throw std::invalid_argument("constraint index out of range");
    return inst.constraints[idx - 1].lhs;
  };
  while (in >> tag) {
    size_t idx = 0;
    in >> idx;
    if (tag == "m") {
      MatrixEntry e;
      in >> e.block >> e.row >> e.col >> e.value;
      --e.block, --e.row, --e.col;
      target(idx).matrix_terms.push_back(e);
    } else if (tag == "f") {
      int k = 0;
      double v = 0.0;
      in >> k >> v;
      target(idx).free_terms.emplace_back(k - 1, v);
    } else if (tag == "b") {
      if (idx == 0 || idx > ncons) throw std::invalid_argument("bad rhs index");
      in >> inst.constraints[idx - 1].rhs;
    } else {
      throw std::invalid_argument("unknown record '" + tag + "'");
    }
    if (!in) throw std::invalid_argument("truncated record");
  }
  inst.validate();
  return inst;
}

}  // namespace csos::sdp
