#pragma once

// Sparse multivariate polynomials with real coefficients.
//
// Terms are stored in graded-lex order (total degree first, then larger
// exponent of x1 first), which fixes the canonical text form used in
// certificate files.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace csos {

using Exponent = std::vector<int>;

struct GradedLexLess {
  bool operator()(const Exponent& a, const Exponent& b) const;
};

int total_degree(const Exponent& e);

class Polynomial {
 public:
  using TermMap = std::map<Exponent, double, GradedLexLess>;

  static constexpr double kDefaultPrune = 1e-14;

  Polynomial() = default;
  explicit Polynomial(int nvars) : nvars_(nvars) {}

  static Polynomial constant(int nvars, double c);
  static Polynomial variable(int nvars, int index);
  static Polynomial monomial(const Exponent& e, double c = 1.0);

  int nvars() const { return nvars_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  // -1 for the zero polynomial.
  int degree() const;
  double coeff(const Exponent& e) const;
  double constant_term() const;

  // Adds c to the coefficient of e and drops the term if it falls below the
  // prune threshold.
  void add_term(const Exponent& e, double c);
  void prune(double threshold = kDefaultPrune);

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double s);

  double max_abs_coeff() const;

  bool operator==(const Polynomial& other) const = default;

 private:
  int nvars_ = 0;
  TermMap terms_;
};

Polynomial add(const Polynomial& a, const Polynomial& b);
Polynomial sub(const Polynomial& a, const Polynomial& b);
Polynomial mul(const Polynomial& a, const Polynomial& b);
Polynomial scale(const Polynomial& p, double s);
Polynomial pow(const Polynomial& p, int k);

Polynomial operator+(const Polynomial& a, const Polynomial& b);
Polynomial operator-(const Polynomial& a, const Polynomial& b);
Polynomial operator-(const Polynomial& a);
Polynomial operator*(const Polynomial& a, const Polynomial& b);
Polynomial operator*(double s, const Polynomial& p);
Polynomial operator*(const Polynomial& p, double s);

double eval(const Polynomial& p, const Eigen::Ref<const Eigen::VectorXd>& point);

std::vector<Polynomial> grad(const Polynomial& p);
Polynomial derivative(const Polynomial& p, int var);

// Substitutes z = A z' + b, returning a polynomial in A.cols() variables.
Polynomial compose_affine(const Polynomial& p, const Eigen::MatrixXd& A,
                          const Eigen::VectorXd& b);

// Directional derivative grad(p) . field, e.g. V-dot along a vector field.
Polynomial lie_derivative(const Polynomial& p,
                          const std::vector<Polynomial>& field);

// Largest coefficient-wise difference (0 when both are the zero polynomial).
double max_coeff_diff(const Polynomial& a, const Polynomial& b);

// Canonical text form: "c * x1^a1 x3^a3 + c2 * x2^1 + c0". Coefficients are
// printed with round-trip precision; zero exponents are omitted.
std::string to_string(const Polynomial& p);
Polynomial parse_polynomial(const std::string& text, int nvars);

}  // namespace csos
