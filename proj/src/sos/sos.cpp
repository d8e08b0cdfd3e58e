#include "csos/sos.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace csos::sos {

namespace {

std::string join_label(const std::string& a, const char* op, const std::string& b) {
  const std::string la = a.empty() ? "<expr>" : a;
  const std::string lb = b.empty() ? "<expr>" : b;
  std::string out = "(" + la + op + lb + ")";
  if (out.size() > 160) out = out.substr(0, 157) + "...";
  return out;
}

Exponent add_exponents(const Exponent& a, const Exponent& b) {
  Exponent e(a.size());
  for (size_t i = 0; i < a.size(); ++i) e[i] = a[i] + b[i];
  return e;
}

void enumerate_monomials(int nvars, int degree, int var, Exponent& cur,
                         std::vector<Exponent>& out) {
  if (var == nvars - 1) {
    cur[var] = degree;
    out.push_back(cur);
    cur[var] = 0;
    return;
  }
  for (int a = degree; a >= 0; --a) {
    cur[var] = a;
    enumerate_monomials(nvars, degree - a, var + 1, cur, out);
  }
  cur[var] = 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// AffineExpr

AffineExpr AffineExpr::variable(int id, double coeff) {
  AffineExpr e;
  if (coeff != 0.0) e.coeffs_[id] = coeff;
  return e;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& o) {
  constant_ += o.constant_;
  for (const auto& [k, v] : o.coeffs_) {
    auto [it, inserted] = coeffs_.try_emplace(k, v);
    if (!inserted) {
      it->second += v;
      if (it->second == 0.0) coeffs_.erase(it);
    }
  }
  return *this;
}

AffineExpr& AffineExpr::operator*=(double s) {
  constant_ *= s;
  if (s == 0.0) {
    coeffs_.clear();
  } else {
    for (auto& [k, v] : coeffs_) v *= s;
  }
  return *this;
}

double AffineExpr::value(const std::vector<double>& vars) const {
  double s = constant_;
  for (const auto& [k, v] : coeffs_) s += v * vars.at(k);
  return s;
}

AffineExpr operator+(const AffineExpr& a, const AffineExpr& b) {
  AffineExpr r = a;
  r += b;
  return r;
}

AffineExpr operator-(const AffineExpr& a, const AffineExpr& b) {
  AffineExpr r = b;
  r *= -1.0;
  r += a;
  return r;
}

AffineExpr operator*(double s, const AffineExpr& a) {
  AffineExpr r = a;
  r *= s;
  return r;
}

// ---------------------------------------------------------------------------
// PolyExpr

PolyExpr::PolyExpr(const Polynomial& p, std::string label)
    : nvars_(p.nvars()), label_(std::move(label)) {
  for (const auto& [e, c] : p.terms()) terms_.emplace(e, AffineExpr(c));
}

PolyExpr PolyExpr::constant(int nvars, const AffineExpr& c, std::string label) {
  PolyExpr p(nvars, std::move(label));
  p.add_term(Exponent(nvars, 0), c);
  return p;
}

bool PolyExpr::is_fixed() const {
  return std::all_of(terms_.begin(), terms_.end(),
                     [](const auto& kv) { return kv.second.is_constant(); });
}

Polynomial PolyExpr::fixed_value() const {
  if (!is_fixed()) {
    throw std::logic_error("fixed_value: expression '" + label_ + "' has decision variables");
  }
  Polynomial p(nvars_);
  for (const auto& [e, c] : terms_) p.add_term(e, c.constant());
  return p;
}

int PolyExpr::degree() const {
  if (terms_.empty()) return -1;
  return total_degree(terms_.rbegin()->first);
}

AffineExpr PolyExpr::coeff(const Exponent& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? AffineExpr() : it->second;
}

void PolyExpr::add_term(const Exponent& e, const AffineExpr& c) {
  if (static_cast<int>(e.size()) != nvars_) {
    throw std::invalid_argument("PolyExpr: exponent length mismatch");
  }
  auto [it, inserted] = terms_.try_emplace(e, c);
  if (!inserted) it->second += c;
  if (it->second.is_constant() && std::abs(it->second.constant()) < Polynomial::kDefaultPrune) {
    terms_.erase(it);
  }
}

PolyExpr& PolyExpr::operator+=(const PolyExpr& o) {
  if (o.nvars_ != nvars_) throw std::invalid_argument("PolyExpr: nvars mismatch in '+'");
  for (const auto& [e, c] : o.terms_) add_term(e, c);
  label_ = join_label(label_, "+", o.label_);
  return *this;
}

PolyExpr& PolyExpr::operator-=(const PolyExpr& o) {
  if (o.nvars_ != nvars_) throw std::invalid_argument("PolyExpr: nvars mismatch in '-'");
  for (const auto& [e, c] : o.terms_) add_term(e, -1.0 * c);
  label_ = join_label(label_, "-", o.label_);
  return *this;
}

PolyExpr& PolyExpr::operator*=(double s) {
  for (auto& [e, c] : terms_) c *= s;
  std::erase_if(terms_, [](const auto& kv) { return kv.second.is_zero(); });
  return *this;
}

Polynomial PolyExpr::value(const std::vector<double>& vars) const {
  Polynomial p(nvars_);
  for (const auto& [e, c] : terms_) p.add_term(e, c.value(vars));
  return p;
}

PolyExpr operator+(const PolyExpr& a, const PolyExpr& b) {
  PolyExpr r = a;
  r += b;
  return r;
}

PolyExpr operator-(const PolyExpr& a, const PolyExpr& b) {
  PolyExpr r = a;
  r -= b;
  return r;
}

PolyExpr operator-(const PolyExpr& a) {
  PolyExpr r = a;
  r *= -1.0;
  r.set_label("-" + a.label());
  return r;
}

PolyExpr operator*(double s, const PolyExpr& a) {
  PolyExpr r = a;
  r *= s;
  return r;
}

PolyExpr operator*(const PolyExpr& a, const PolyExpr& b) {
  if (a.nvars() != b.nvars()) throw std::invalid_argument("PolyExpr: nvars mismatch in '*'");
  const bool af = a.is_fixed();
  const bool bf = b.is_fixed();
  if (!af && !bf) {
    throw BilinearError("bilinear product " + join_label(a.label(), "*", b.label()) +
                        ": both factors contain decision variables");
  }
  const PolyExpr& fixed = af ? a : b;
  const PolyExpr& other = af ? b : a;
  PolyExpr r(a.nvars(), join_label(a.label(), "*", b.label()));
  for (const auto& [ef, cf] : fixed.terms()) {
    for (const auto& [eo, co] : other.terms()) {
      r.add_term(add_exponents(ef, eo), cf.constant() * co);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Bases and Gram forms

std::vector<Exponent> monomials_between(int nvars, int min_deg, int max_deg) {
  std::vector<Exponent> out;
  Exponent cur(nvars, 0);
  for (int d = std::max(0, min_deg); d <= max_deg; ++d) {
    if (nvars == 0) {
      if (d == 0) out.push_back(cur);
      continue;
    }
    enumerate_monomials(nvars, d, 0, cur, out);
  }
  return out;
}

std::vector<Exponent> monomial_basis(int nvars, int max_deg, bool no_constant) {
  if (max_deg < 0) throw std::invalid_argument("monomial_basis: max_deg < 0");
  return monomials_between(nvars, no_constant ? 1 : 0, max_deg);
}

Polynomial gram_polynomial(const std::vector<Exponent>& basis, const Eigen::MatrixXd& gram) {
  if (basis.empty()) return Polynomial();
  Polynomial p(static_cast<int>(basis[0].size()));
  for (size_t i = 0; i < basis.size(); ++i) {
    for (size_t j = 0; j < basis.size(); ++j) {
      p.add_term(add_exponents(basis[i], basis[j]), gram(i, j));
    }
  }
  return p;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string expect_line(std::istream& in, const std::string& keyword) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(keyword, 0) != 0) {
    throw std::invalid_argument("certificate: expected '" + keyword + "'");
  }
  return line.substr(keyword.size());
}

}  // namespace

void write_certificate(std::ostream& out, const SosCertificate& cert) {
  const int nvars = cert.basis.empty() ? cert.target.nvars() : static_cast<int>(cert.basis[0].size());
  out << "sos_certificate " << cert.name << "\n";
  out << "basis " << nvars << " " << cert.basis.size() << "\n";
  for (const auto& e : cert.basis) {
    for (size_t i = 0; i < e.size(); ++i) out << (i ? " " : "") << e[i];
    out << "\n";
  }
  for (Eigen::Index i = 0; i < cert.gram.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      out << "gram " << i << " " << j << " " << format_double(cert.gram(i, j)) << "\n";
    }
  }
  out << "target " << to_string(cert.target) << "\n";
  out << "residual " << format_double(cert.reconstruction_residual) << "\n";
}

SosCertificate read_certificate(std::istream& in) {
  SosCertificate cert;
  cert.name = expect_line(in, "sos_certificate ");
  std::istringstream head(expect_line(in, "basis "));
  int nvars = 0;
  size_t size = 0;
  if (!(head >> nvars >> size)) throw std::invalid_argument("certificate: bad basis header");
  std::string line;
  for (size_t k = 0; k < size; ++k) {
    if (!std::getline(in, line)) throw std::invalid_argument("certificate: truncated basis");
    std::istringstream ls(line);
    Exponent e(nvars);
    for (auto& a : e) {
      if (!(ls >> a)) throw std::invalid_argument("certificate: bad basis monomial");
    }
    cert.basis.push_back(std::move(e));
  }
  cert.gram = Eigen::MatrixXd::Zero(size, size);
  for (size_t i = 0; i < size; ++i) {
    for (size_t j = 0; j <= i; ++j) {
      std::istringstream ls(expect_line(in, "gram "));
      size_t r = 0, c = 0;
      double v = 0.0;
      if (!(ls >> r >> c >> v) || r != i || c != j) {
        throw std::invalid_argument("certificate: bad gram entry");
      }
      cert.gram(r, c) = cert.gram(c, r) = v;
    }
  }
  cert.target = parse_polynomial(expect_line(in, "target "), nvars);
  cert.reconstruction_residual = std::stod(expect_line(in, "residual "));
  if (size > 0) {
    cert.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cert.gram, Eigen::EigenvaluesOnly)
                              .eigenvalues()
                              .minCoeff();
  }
  return cert;
}

// ---------------------------------------------------------------------------
// SosProgram

sdp::SolveOptions SosProgram::default_solve_options() {
  sdp::SolveOptions o;
  o.tolerance = 1e-9;
  return o;
}

AffineExpr SosProgram::new_free_scalar(const std::string& name) {
  vars_.push_back({name, true, num_free_++, 0, 0});
  return AffineExpr::variable(num_variables() - 1);
}

AffineExpr SosProgram::new_nonnegative_scalar(const std::string& name) {
  const int block = static_cast<int>(multiplier_blocks_.size());
  multiplier_blocks_.push_back(1);
  vars_.push_back({name, false, block, 0, 0});
  return AffineExpr::variable(num_variables() - 1);
}

PolyExpr SosProgram::new_free_polynomial(const std::string& name,
                                         const std::vector<Exponent>& monomials) {
  PolyExpr p(nvars_, name);
  for (const auto& m : monomials) {
    p.add_term(m, new_free_scalar(name + "[" + std::to_string(total_degree(m)) + "]"));
  }
  return p;
}

PolyExpr SosProgram::new_sos_polynomial(const std::string& name,
                                        const std::vector<Exponent>& basis) {
  if (basis.empty()) throw std::invalid_argument("new_sos_polynomial: empty basis");
  const int block = static_cast<int>(multiplier_blocks_.size());
  const int n = static_cast<int>(basis.size());
  multiplier_blocks_.push_back(n);
  PolyExpr p(nvars_, name);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      vars_.push_back({name, false, block, i, j});
      p.add_term(add_exponents(basis[i], basis[j]),
                 AffineExpr::variable(num_variables() - 1, i == j ? 1.0 : 2.0));
    }
  }
  return p;
}

PolyExpr SosProgram::new_sos_multiplier(const std::string& name, int degree,
                                        bool vanish_at_origin) {
  if (degree < 0 || degree % 2 != 0) {
    throw std::invalid_argument("SOS multiplier '" + name + "' needs an even degree");
  }
  if (degree == 0) {
    if (vanish_at_origin) {
      throw std::invalid_argument("degree-0 multiplier '" + name + "' cannot vanish at the origin");
    }
    return PolyExpr::constant(nvars_, new_nonnegative_scalar(name), name);
  }
  return new_sos_polynomial(name, monomial_basis(nvars_, degree / 2, vanish_at_origin));
}

PolyExpr SosProgram::new_free_multiplier(const std::string& name, int degree) {
  if (degree < 0) throw std::invalid_argument("negative multiplier degree");
  return new_free_polynomial(name, monomial_basis(nvars_, degree));
}

void SosProgram::add_sos_constraint(const std::string& name, const PolyExpr& e) {
  if (e.nvars() != nvars_) {
    throw std::invalid_argument("SOS constraint '" + name + "' has " + std::to_string(e.nvars()) +
                                " variables, program has " + std::to_string(nvars_));
  }
  constraints_.push_back({name, e});
}

void SosProgram::add_equality(const std::string& name, const AffineExpr& e) {
  equalities_.emplace_back(name, e);
}

void SosProgram::set_objective(Sense sense, const AffineExpr& objective) {
  sense_ = sense;
  objective_ = objective;
}

CompiledProgram SosProgram::compile() const {
  CompiledProgram out;
  auto& inst = out.instance;
  inst.psd_blocks = multiplier_blocks_;
  inst.free_vars = num_free_;

  auto append = [&](sdp::LinearFunctional& f, const AffineExpr& e, double sign) {
    for (const auto& [id, a] : e.coeffs()) {
      const Var& v = vars_[id];
      if (v.free) {
        f.free_terms.emplace_back(v.index, sign * a);
      } else {
        // Coefficient a multiplies the entry X[row][col]; SDPA off-diagonal
        // entries count twice.
        f.matrix_terms.push_back({v.index, v.row, v.col, sign * (v.row == v.col ? a : 0.5 * a)});
      }
    }
  };

  for (const auto& con : constraints_) {
    const PolyExpr& e = con.expr;
    const int deg = e.degree();
    std::vector<Exponent> basis;
    if (deg >= 0) {
      const bool no_constant = e.coeff(Exponent(nvars_, 0)).is_zero();
      basis = monomial_basis(nvars_, deg / 2, no_constant);
    }
    if (basis.empty()) {
      // Only the zero polynomial is representable: every coefficient vanishes.
      for (const auto& [mono, c] : e.terms()) {
        sdp::EqualityConstraint eq;
        append(eq.lhs, c, 1.0);
        eq.rhs = -c.constant();
        if (eq.lhs.free_terms.empty() && eq.lhs.matrix_terms.empty()) {
          if (out.structural_infeasibility.empty()) {
            out.structural_infeasibility = "constraint '" + con.name + "' cannot match monomial " +
                                           to_string(Polynomial::monomial(mono, 1.0));
          }
          continue;
        }
        inst.constraints.push_back(std::move(eq));
      }
      out.constraint_blocks.push_back(-1);
      out.constraint_bases.push_back({});
      continue;
    }
    const int block = static_cast<int>(inst.psd_blocks.size());
    inst.psd_blocks.push_back(static_cast<int>(basis.size()));
    std::map<Exponent, std::vector<std::pair<int, int>>, GradedLexLess> pairs;
    for (size_t i = 0; i < basis.size(); ++i) {
      for (size_t j = i; j < basis.size(); ++j) {
        pairs[add_exponents(basis[i], basis[j])].emplace_back(static_cast<int>(i),
                                                              static_cast<int>(j));
      }
    }
    for (const auto& [mono, c] : e.terms()) pairs.try_emplace(mono);
    for (const auto& [mono, entries] : pairs) {
      sdp::EqualityConstraint eq;
      for (const auto& [i, j] : entries) eq.lhs.matrix_terms.push_back({block, i, j, 1.0});
      const AffineExpr c = e.coeff(mono);
      append(eq.lhs, c, -1.0);
      eq.rhs = c.constant();
      if (eq.lhs.matrix_terms.empty() && eq.lhs.free_terms.empty()) {
        if (eq.rhs != 0.0 && out.structural_infeasibility.empty()) {
          out.structural_infeasibility = "constraint '" + con.name + "' cannot match monomial " +
                                         to_string(Polynomial::monomial(mono, 1.0));
        }
        continue;
      }
      inst.constraints.push_back(std::move(eq));
    }
    out.constraint_blocks.push_back(block);
    out.constraint_bases.push_back(std::move(basis));
  }

  for (const auto& [name, e] : equalities_) {
    sdp::EqualityConstraint eq;
    append(eq.lhs, e, 1.0);
    eq.rhs = -e.constant();
    inst.constraints.push_back(std::move(eq));
  }

  const double sign = sense_ == Sense::kMaximize ? -1.0 : 1.0;
  if (sense_ != Sense::kFeasibility) {
    append(inst.objective, objective_, sign);
    inst.objective_constant = sign * objective_.constant();
  }
  return out;
}

SosSolveResult SosProgram::solve(const sdp::SolveOptions& options) const {
  const CompiledProgram compiled = compile();
  SosSolveResult result;
  if (!compiled.structural_infeasibility.empty()) {
    result.status = result.sdp.status = sdp::SolveStatus::kInfeasible;
    result.sdp.message = compiled.structural_infeasibility;
    result.values.assign(vars_.size(), 0.0);
    return result;
  }
  result.sdp = sdp::solve(compiled.instance, options);
  result.status = result.sdp.status;
  result.values.assign(vars_.size(), 0.0);
  for (size_t id = 0; id < vars_.size(); ++id) {
    const Var& v = vars_[id];
    if (v.free) {
      result.values[id] = result.sdp.free_values[v.index];
    } else {
      result.values[id] = result.sdp.block_values[v.index](v.row, v.col);
    }
  }
  if (sense_ != Sense::kFeasibility) result.objective = objective_.value(result.values);
  for (size_t k = 0; k < constraints_.size(); ++k) {
    SosCertificate cert;
    cert.name = constraints_[k].name;
    cert.basis = compiled.constraint_bases[k];
    cert.target = constraints_[k].expr.value(result.values);
    const int block = compiled.constraint_blocks[k];
    if (block >= 0) {
      const Eigen::MatrixXd& raw = result.sdp.block_values[block];
      cert.gram = 0.5 * (raw + raw.transpose());
      cert.reconstruction_residual =
          max_coeff_diff(gram_polynomial(cert.basis, cert.gram), cert.target);
      cert.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                                cert.gram, Eigen::EigenvaluesOnly)
                                .eigenvalues()
                                .minCoeff();
    } else {
      cert.reconstruction_residual = cert.target.max_abs_coeff();
    }
    result.certificates.push_back(std::move(cert));
  }
  return result;
}

SosCheck check_sos(const Polynomial& p, const sdp::SolveOptions& options) {
  if (p.degree() > 0 && p.degree() % 2 != 0) {
    throw std::invalid_argument("check_sos: polynomial has odd degree " + std::to_string(p.degree()));
  }
  SosCheck out;
  if (p.is_zero()) {
    out.verdict = SosVerdict::kSos;
    out.certificate = SosCertificate{"p", {}, Eigen::MatrixXd(), p, 0.0, 0.0};
    out.sdp.status = sdp::SolveStatus::kOptimal;
    return out;
  }
  SosProgram prog(p.nvars());
  prog.add_sos_constraint("p", PolyExpr(p, "p"));
  SosSolveResult r = prog.solve(options);
  out.sdp = r.sdp;
  switch (r.status) {
    case sdp::SolveStatus::kOptimal:
      out.verdict = SosVerdict::kSos;
      out.certificate = r.certificates.at(0);
      break;
    case sdp::SolveStatus::kInfeasible:
      out.verdict = SosVerdict::kNotSos;
      break;
    default:
      out.verdict = SosVerdict::kNumericalFailure;
  }
  return out;
}

// ---------------------------------------------------------------------------
// P-satz templates

PolyExpr lambda_dot_g(const std::vector<PolyExpr>& lambda, const std::vector<Polynomial>& g,
                      int nvars) {
  PolyExpr sum(nvars, "lambda'g");
  if (g.empty()) return sum;
  if (lambda.size() != g.size()) {
    throw std::invalid_argument("lambda has " + std::to_string(lambda.size()) +
                                " entries for " + std::to_string(g.size()) + " constraints");
  }
  for (size_t k = 0; k < g.size(); ++k) sum += lambda[k] * PolyExpr(g[k], "g");
  return sum.set_label("lambda'g");
}

namespace {

struct TemplateContext {
  const PsatzOperands& ops;
  int nvars;

  const PolyExpr& require(const PolyExpr& e, const char* name) const {
    if (e.nvars() == 0) throw std::invalid_argument(std::string("P-satz operand '") + name + "' missing");
    return e;
  }
  PolyExpr optional(const PolyExpr& e) const {
    return e.nvars() == 0 ? PolyExpr(nvars) : e;
  }
  const PolyExpr& s(int k) const {
    auto it = ops.s.find(k);
    if (it == ops.s.end()) {
      throw std::invalid_argument("P-satz multiplier s" + std::to_string(k) + " missing");
    }
    return it->second;
  }
  PolyExpr lambda_g(int k) const {
    if (ops.g.empty()) return PolyExpr(nvars);
    auto it = ops.lambda.find(k);
    if (it == ops.lambda.end()) {
      throw std::invalid_argument("P-satz multiplier lambda" + std::to_string(k) + " missing");
    }
    return lambda_dot_g(it->second, ops.g, nvars);
  }
  PolyExpr one() const { return PolyExpr(Polynomial::constant(nvars, 1.0), "1"); }
};

int chart_of(const PsatzOperands& ops) {
  int n = 0;
  auto visit = [&](int k, const std::string& what) {
    if (k == 0) return;
    if (n == 0) n = k;
    if (k != n) {
      throw std::invalid_argument("chart mismatch: operand " + what + " has " + std::to_string(k) +
                                  " variables, expected " + std::to_string(n));
    }
  };
  for (const auto& gi : ops.g) visit(gi.nvars(), "g");
  for (const PolyExpr* e : {&ops.V, &ops.Vdot, &ops.V_next, &ops.p, &ops.beta, &ops.beta1, &ops.c,
                            &ops.l1, &ops.l2}) {
    visit(e->nvars(), e->label());
  }
  for (const auto& [k, e] : ops.s) visit(e.nvars(), "s" + std::to_string(k));
  for (const auto& [k, lam] : ops.lambda) {
    for (const auto& e : lam) visit(e.nvars(), "lambda" + std::to_string(k));
  }
  if (n == 0) throw std::invalid_argument("P-satz template without operands");
  return n;
}

}  // namespace

std::vector<PolyExpr> assemble_psatz_constraint(PsatzTemplate which, const PsatzOperands& ops) {
  const TemplateContext t{ops, chart_of(ops)};
  std::vector<PolyExpr> out;
  switch (which) {
    case PsatzTemplate::kInitialEstimate: {
      // -s2 (beta - p) + V - lambda1'g - l1
      // -s6 (beta - p) - Vdot - lambda2'g - l2
      const PolyExpr gap = t.require(ops.beta, "beta") - t.require(ops.p, "p");
      out.push_back(-(t.s(2) * gap) + t.require(ops.V, "V") - t.lambda_g(1) - t.optional(ops.l1));
      out.push_back(-(t.s(6) * gap) - t.require(ops.Vdot, "Vdot") - t.lambda_g(2) -
                    t.optional(ops.l2));
      break;
    }
    case PsatzTemplate::kLocalContainment: {
      // Emptiness of {V <= c, p >= beta, p != beta, g = 0}:
      //   -s1 (c - V) - s2 (p - beta1) - s3 (c - V)(p - beta) - lambda1'g - (p - beta)^2
      // Emptiness of {V <= c, V_next >= 1, V_next != 1, g = 0}, reduced as for
      // the successor template:
      //   -s4 (c - V) - lambda2'g - (V_next - 1)
      const PolyExpr& p = t.require(ops.p, "p");
      const PolyExpr& beta = t.require(ops.beta, "beta");
      const PolyExpr beta1 = ops.beta1.nvars() == 0 ? beta : ops.beta1;
      const PolyExpr level = t.require(ops.c, "c") - t.require(ops.V, "V");
      const PolyExpr excess = p - beta;
      out.push_back(-(t.s(1) * level) - t.s(2) * (p - beta1) - t.s(3) * (level * excess) -
                    t.lambda_g(1) - excess * excess);
      if (ops.V_next.nvars() != 0) {
        out.push_back(-(t.s(4) * level) - t.lambda_g(2) - (ops.V_next - t.one()));
      }
      break;
    }
    case PsatzTemplate::kExpandInterior: {
      // s2 V - lambda1'g - l1
      // -s6 (beta - p) - lambda2'g - (V - 1)
      // -s8 (1 - V) - s9 Vdot - lambda3'g
      const PolyExpr& V = t.require(ops.V, "V");
      out.push_back(t.s(2) * V - t.lambda_g(1) - t.optional(ops.l1));
      out.push_back(-(t.s(6) * (t.require(ops.beta, "beta") - t.require(ops.p, "p"))) -
                    t.lambda_g(2) - (V - t.one()));
      out.push_back(-(t.s(8) * (t.one() - V)) - t.s(9) * t.require(ops.Vdot, "Vdot") -
                    t.lambda_g(3));
      break;
    }
    case PsatzTemplate::kSuccessorContainment: {
      // -s13 (1 - V) - lambda4'g - (V_next - 1)
      out.push_back(-(t.s(13) * (t.one() - t.require(ops.V, "V"))) - t.lambda_g(4) -
                    (t.require(ops.V_next, "V_next") - t.one()));
      break;
    }
  }
  return out;
}

}  // namespace csos::sos
