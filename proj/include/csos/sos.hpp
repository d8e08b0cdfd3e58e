#pragma once

// Sum-of-squares programs compiled to semidefinite programs.
//
// Decision quantities are scalars of two kinds: free reals and entries of
// Gram matrices belonging to SOS multipliers. A PolyExpr is a polynomial
// whose coefficients are affine in those scalars. Every constraint
// "e is SOS" gets its own Gram block; each monomial coefficient of e is
// matched against the Gram block by an equality constraint.

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "csos/polynomial.hpp"
#include "csos/sdp.hpp"

namespace csos::sos {

// Product of two expressions that both depend on decision variables.
class BilinearError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class AffineExpr {
 public:
  AffineExpr() = default;
  explicit AffineExpr(double c) : constant_(c) {}
  static AffineExpr variable(int id, double coeff = 1.0);

  double constant() const { return constant_; }
  const std::map<int, double>& coeffs() const { return coeffs_; }
  bool is_constant() const { return coeffs_.empty(); }
  bool is_zero() const { return coeffs_.empty() && constant_ == 0.0; }

  AffineExpr& operator+=(const AffineExpr& o);
  AffineExpr& operator*=(double s);

  double value(const std::vector<double>& vars) const;

 private:
  double constant_ = 0.0;
  std::map<int, double> coeffs_;
};

AffineExpr operator+(const AffineExpr& a, const AffineExpr& b);
AffineExpr operator-(const AffineExpr& a, const AffineExpr& b);
AffineExpr operator*(double s, const AffineExpr& a);

class PolyExpr {
 public:
  using TermMap = std::map<Exponent, AffineExpr, GradedLexLess>;

  PolyExpr() = default;
  explicit PolyExpr(int nvars, std::string label = "")
      : nvars_(nvars), label_(std::move(label)) {}
  // Fixed (decision-free) expression.
  PolyExpr(const Polynomial& p, std::string label = "");
  static PolyExpr constant(int nvars, const AffineExpr& c, std::string label = "");

  int nvars() const { return nvars_; }
  const TermMap& terms() const { return terms_; }
  const std::string& label() const { return label_; }
  PolyExpr& set_label(std::string l) {
    label_ = std::move(l);
    return *this;
  }
  bool is_fixed() const;
  // Requires is_fixed().
  Polynomial fixed_value() const;
  int degree() const;
  AffineExpr coeff(const Exponent& e) const;

  void add_term(const Exponent& e, const AffineExpr& c);

  PolyExpr& operator+=(const PolyExpr& o);
  PolyExpr& operator-=(const PolyExpr& o);
  PolyExpr& operator*=(double s);

  Polynomial value(const std::vector<double>& vars) const;

 private:
  int nvars_ = 0;
  std::string label_;
  TermMap terms_;
};

PolyExpr operator+(const PolyExpr& a, const PolyExpr& b);
PolyExpr operator-(const PolyExpr& a, const PolyExpr& b);
PolyExpr operator-(const PolyExpr& a);
PolyExpr operator*(double s, const PolyExpr& a);
// Throws BilinearError when neither side is fixed.
PolyExpr operator*(const PolyExpr& a, const PolyExpr& b);

// All monomials of degree <= max_deg in graded-lex order, optionally without
// the constant monomial.
std::vector<Exponent> monomial_basis(int nvars, int max_deg, bool no_constant = false);
// Monomials with total degree in [min_deg, max_deg].
std::vector<Exponent> monomials_between(int nvars, int min_deg, int max_deg);

struct SosCertificate {
  std::string name;
  std::vector<Exponent> basis;
  Eigen::MatrixXd gram;
  Polynomial target;
  double reconstruction_residual = 0.0;
  double min_eigenvalue = 0.0;
};

// Text form: a header line, one line per basis monomial, the lower-triangular
// Gram entries row by row, the target polynomial and the residual:
//   sos_certificate <name>
//   basis <nvars> <size>
//   <e_1> ... <e_nvars>
//   gram <i> <j> <value>            (i >= j, 0-based)
//   target <canonical polynomial text>
//   residual <value>
void write_certificate(std::ostream& out, const SosCertificate& cert);
SosCertificate read_certificate(std::istream& in);

// basis' * gram * basis as a polynomial.
Polynomial gram_polynomial(const std::vector<Exponent>& basis, const Eigen::MatrixXd& gram);

enum class Sense { kFeasibility, kMinimize, kMaximize };

struct SosSolveResult {
  sdp::SolveStatus status = sdp::SolveStatus::kNumericalFailure;
  std::vector<double> values;  // indexed by decision variable id
  std::vector<SosCertificate> certificates;
  double objective = 0.0;
  sdp::SdpSolution sdp;
  bool feasible() const { return status == sdp::SolveStatus::kOptimal; }
  double value(const AffineExpr& e) const { return e.value(values); }
  Polynomial value(const PolyExpr& e) const { return e.value(values); }
};

struct CompiledProgram {
  sdp::SdpInstance instance;
  // Gram block index and basis per SOS constraint.
  std::vector<int> constraint_blocks;
  std::vector<std::vector<Exponent>> constraint_bases;
  // Set when some coefficient reduces to "0 = nonzero constant"; names the
  // constraint and monomial.
  std::string structural_infeasibility;
};

class SosProgram {
 public:
  explicit SosProgram(int nvars) : nvars_(nvars) {}

  int nvars() const { return nvars_; }
  int num_variables() const { return static_cast<int>(vars_.size()); }

  AffineExpr new_free_scalar(const std::string& name);
  // 1x1 PSD block.
  AffineExpr new_nonnegative_scalar(const std::string& name);
  // Polynomial with one free coefficient per monomial.
  PolyExpr new_free_polynomial(const std::string& name, const std::vector<Exponent>& monomials);
  // basis' Q basis with Q >= 0.
  PolyExpr new_sos_polynomial(const std::string& name, const std::vector<Exponent>& basis);
  // Convenience for multipliers: degree 0 gives a nonnegative scalar,
  // otherwise a Gram form over monomials up to degree / 2.
  PolyExpr new_sos_multiplier(const std::string& name, int degree, bool vanish_at_origin = false);
  PolyExpr new_free_multiplier(const std::string& name, int degree);

  void add_sos_constraint(const std::string& name, const PolyExpr& e);
  void add_equality(const std::string& name, const AffineExpr& e);
  void set_objective(Sense sense, const AffineExpr& objective);

  CompiledProgram compile() const;
  SosSolveResult solve(const sdp::SolveOptions& options = default_solve_options()) const;

  static sdp::SolveOptions default_solve_options();

 private:
  struct Var {
    std::string name;
    bool free = true;
    int index = 0;  // free index or block
    int row = 0;
    int col = 0;
  };
  struct Constraint {
    std::string name;
    PolyExpr expr;
  };

  int nvars_;
  int num_free_ = 0;
  std::vector<int> multiplier_blocks_;
  std::vector<Var> vars_;
  std::vector<Constraint> constraints_;
  std::vector<std::pair<std::string, AffineExpr>> equalities_;
  Sense sense_ = Sense::kFeasibility;
  AffineExpr objective_;
};

enum class SosVerdict { kSos, kNotSos, kNumericalFailure };

struct SosCheck {
  SosVerdict verdict = SosVerdict::kNumericalFailure;
  std::optional<SosCertificate> certificate;
  sdp::SdpSolution sdp;
};

// Requires even degree; throws std::invalid_argument otherwise.
SosCheck check_sos(const Polynomial& p,
                   const sdp::SolveOptions& options = SosProgram::default_solve_options());

// P-satz constraint templates. Each returns the list of expressions that must
// be SOS, built from the supplied operands; multipliers and lambda vectors
// are passed in by the caller so any of them may be fixed or undetermined.
enum class PsatzTemplate {
  kInitialEstimate,       // V positive, V-dot negative on {p <= beta}
  kLocalContainment,      // {V <= c} inside {p <= beta} and the successor set
  kExpandInterior,        // {p <= beta} inside {V <= 1}, {V <= 1} invariant
  kSuccessorContainment,  // {V <= 1} inside {V_next <= 1}
};

struct PsatzOperands {
  std::vector<Polynomial> g;  // algebraic constraints g(z) = 0
  PolyExpr V, Vdot, V_next, p;
  PolyExpr beta, beta1, c;
  PolyExpr l1, l2;
  // Multipliers by their index in the constraint lists (s1..s13).
  std::map<int, PolyExpr> s;
  // lambda_k vectors, one entry per element of g.
  std::map<int, std::vector<PolyExpr>> lambda;
};

std::vector<PolyExpr> assemble_psatz_constraint(PsatzTemplate which, const PsatzOperands& ops);

// lambda' g.
PolyExpr lambda_dot_g(const std::vector<PolyExpr>& lambda, const std::vector<Polynomial>& g, int nvars);

}  // namespace csos::sos
