#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "csos/sos.hpp"

namespace csos::sos {
namespace {

Polynomial x(int n, int i) { return Polynomial::variable(n, i); }

Polynomial motzkin() {
  const Polynomial a = x(2, 0), b = x(2, 1);
  return pow(a, 4) * pow(b, 2) + pow(a, 2) * pow(b, 4) - 3.0 * pow(a, 2) * pow(b, 2) +
         Polynomial::constant(2, 1.0);
}

double min_eig(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff();
}

TEST(MonomialBasisTest, SmallCases) {
  const auto full = monomial_basis(2, 1);
  ASSERT_EQ(full.size(), 3u);
  EXPECT_EQ(full[0], (Exponent{0, 0}));
  EXPECT_EQ(full[1], (Exponent{1, 0}));
  EXPECT_EQ(full[2], (Exponent{0, 1}));
  const auto nc = monomial_basis(2, 1, true);
  ASSERT_EQ(nc.size(), 2u);
  EXPECT_EQ(nc[0], (Exponent{1, 0}));
  EXPECT_EQ(monomial_basis(6, 1, true).size(), 6u);
  // C(n + d, d) monomials of degree <= d.
  EXPECT_EQ(monomial_basis(6, 2).size(), 28u);
  EXPECT_EQ(monomials_between(3, 2, 2).size(), 6u);
}

TEST(SosCompileTest, FixedQuadraticIsSos) {
  const Polynomial q = 2.0 * pow(x(2, 0), 2) + 2.0 * x(2, 0) * x(2, 1) + pow(x(2, 1), 2);
  const auto check = check_sos(q);
  ASSERT_EQ(check.verdict, SosVerdict::kSos);
  const auto& cert = *check.certificate;
  EXPECT_LE(cert.reconstruction_residual, 1e-8);
  EXPECT_GE(cert.min_eigenvalue, -1e-9);
  // Hand decomposition (x1 + x2)^2 + x1^2 gives Gram [[2,1],[1,1]] on (x1, x2).
  Eigen::MatrixXd hand(2, 2);
  hand << 2, 1, 1, 1;
  EXPECT_GT(min_eig(hand), 0.0);
  EXPECT_LE(max_coeff_diff(gram_polynomial({{1, 0}, {0, 1}}, hand), q), 1e-15);
  // Basis drops the constant monomial since q(0) = 0 structurally.
  EXPECT_EQ(cert.basis.size(), 2u);
}

TEST(SosCompileTest, NegativeSquareIsInfeasible) {
  const auto check = check_sos(-1.0 * pow(x(1, 0), 2));
  EXPECT_EQ(check.verdict, SosVerdict::kNotSos);
  EXPECT_EQ(check.sdp.status, sdp::SolveStatus::kInfeasible);
}

TEST(SosCompileTest, MotzkinIsNotSos) {
  const Polynomial m = motzkin();
  // Nonnegative by AM-GM; spot check.
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int k = 0; k < 200; ++k) EXPECT_GE(eval(m, Eigen::Vector2d(u(rng), u(rng))), -1e-12);
  const auto check = check_sos(m);
  EXPECT_EQ(check.verdict, SosVerdict::kNotSos) << check.sdp.message;
}

TEST(SosCompileTest, IdentityGram) {
  const auto check = check_sos(pow(x(2, 0), 2) + pow(x(2, 1), 2));
  ASSERT_EQ(check.verdict, SosVerdict::kSos);
  const auto& g = check.certificate->gram;
  EXPECT_TRUE(g.isApprox(Eigen::MatrixXd::Identity(2, 2), 1e-7)) << g;
}

TEST(SosCompileTest, QuarticPlusSquare) {
  const Polynomial p = pow(x(2, 0) + x(2, 1), 2) + pow(x(2, 0), 4);
  const auto check = check_sos(p);
  ASSERT_EQ(check.verdict, SosVerdict::kSos);
  EXPECT_LE(check.certificate->reconstruction_residual, 1e-8);
}

TEST(SosCompileTest, OddDegreeRejected) {
  EXPECT_THROW(check_sos(pow(x(1, 0), 3)), std::invalid_argument);
}

TEST(SosCompileTest, BilinearProductNamesBothFactors) {
  SosProgram prog(2);
  const PolyExpr s = prog.new_sos_multiplier("s2", 2);
  const PolyExpr v = prog.new_free_polynomial("V", monomial_basis(2, 2, true));
  try {
    (void)(s * v);
    FAIL() << "expected BilinearError";
  } catch (const BilinearError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("s2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("V"), std::string::npos) << msg;
  }
  // Fixed times decision is fine.
  EXPECT_NO_THROW((void)(PolyExpr(x(2, 0), "x") * v));
}

TEST(SosCompileTest, EqualityConstraintsStayInsideDegreeClosure) {
  SosProgram prog(2);
  const PolyExpr s = prog.new_sos_multiplier("s", 2);
  prog.add_sos_constraint("c", s + PolyExpr(pow(x(2, 0), 2), "q"));
  const auto compiled = prog.compile();
  // Constraint block of size 3 (basis 1, x1, x2), monomials of degree <= 2.
  ASSERT_EQ(compiled.constraint_bases.size(), 1u);
  EXPECT_EQ(compiled.constraint_bases[0].size(), 3u);
  EXPECT_EQ(compiled.instance.constraints.size(), 6u);
}

TEST(SosCompileTest, MaximizeLowerBound) {
  // max t s.t. x^2 - 2x + 3 - t is SOS -> t = 2.
  SosProgram prog(1);
  const AffineExpr t = prog.new_free_scalar("t");
  const Polynomial q = pow(x(1, 0), 2) - 2.0 * x(1, 0) + Polynomial::constant(1, 3.0);
  prog.add_sos_constraint("c", PolyExpr(q, "q") - PolyExpr::constant(1, t, "t"));
  prog.set_objective(Sense::kMaximize, t);
  const auto r = prog.solve();
  ASSERT_TRUE(r.feasible()) << r.sdp.message;
  EXPECT_NEAR(r.objective, 2.0, 1e-6);
  EXPECT_LE(r.certificates[0].reconstruction_residual, 1e-8);
}

TEST(SosCompileTest, SquaresOfRandomPolynomialsAreSos) {
  std::mt19937 rng(7);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 2;
    Polynomial p(n);
    for (const auto& e : monomial_basis(n, 2)) p.add_term(e, n01(rng));
    const auto check = check_sos(p * p);
    ASSERT_EQ(check.verdict, SosVerdict::kSos) << "trial " << trial << ": " << check.sdp.message;
    EXPECT_LE(check.certificate->reconstruction_residual, 1e-8) << "trial " << trial;
  }
}

TEST(SosCompileTest, CertifiedPolynomialsAreNonnegative) {
  std::mt19937 rng(11);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 5; ++trial) {
    Polynomial p(2);
    for (int k = 0; k < 2; ++k) {
      Polynomial q(2);
      for (const auto& e : monomial_basis(2, 2)) q.add_term(e, n01(rng));
      p += q * q;
    }
    p += Polynomial::constant(2, n01(rng));  // may or may not stay SOS
    const auto check = check_sos(p);
    if (check.verdict != SosVerdict::kSos) continue;
    for (int k = 0; k < 1000; ++k) EXPECT_GE(eval(p, Eigen::Vector2d(u(rng), u(rng))), -1e-6);
  }
}

TEST(SosCompileTest, CertificateTextRoundTrip) {
  const auto check = check_sos(pow(x(2, 0) + x(2, 1), 2) + pow(x(2, 0), 4));
  ASSERT_EQ(check.verdict, SosVerdict::kSos);
  std::stringstream ss;
  write_certificate(ss, *check.certificate);
  const auto back = read_certificate(ss);
  EXPECT_EQ(back.basis, check.certificate->basis);
  EXPECT_EQ(back.gram, check.certificate->gram);
  EXPECT_EQ(back.target, check.certificate->target);
  EXPECT_EQ(back.reconstruction_residual, check.certificate->reconstruction_residual);
}

// ---------------------------------------------------------------------------
// P-satz templates, checked by evaluating with every decision fixed.

class PsatzTest : public ::testing::Test {
 protected:
  static constexpr int kN = 3;
  Polynomial z(int i) const { return x(kN, i); }
  PolyExpr fixed(const Polynomial& p, const std::string& name) const { return PolyExpr(p, name); }
  PolyExpr scalar(double v, const std::string& name) const {
    return fixed(Polynomial::constant(kN, v), name);
  }

  PsatzOperands operands() const {
    PsatzOperands ops;
    ops.g = {pow(z(1), 2) + pow(z(2), 2) - 2.0 * z(2)};
    ops.V = fixed(pow(z(0), 2) + 0.5 * pow(z(1), 2) + z(2), "V");
    ops.Vdot = fixed(-1.0 * pow(z(0), 2) + z(0) * z(1), "Vdot");
    ops.V_next = fixed(0.25 * pow(z(0), 2) + 0.3 * z(2), "Vn");
    ops.p = fixed(pow(z(0), 2) + pow(z(1), 2), "p");
    ops.beta = scalar(0.7, "beta");
    ops.c = scalar(0.4, "c");
    for (int k : {1, 2, 3, 4, 6, 8, 9, 13}) {
      ops.s[k] = fixed(Polynomial::constant(kN, 0.1 * k) + pow(z(0), 2), "s" + std::to_string(k));
    }
    for (int k : {1, 2, 3, 4}) ops.lambda[k] = {fixed(z(0) + Polynomial::constant(kN, k), "lam")};
    return ops;
  }
};

TEST_F(PsatzTest, SuccessorContainmentExpression) {
  const auto ops = operands();
  const auto exprs = assemble_psatz_constraint(PsatzTemplate::kSuccessorContainment, ops);
  ASSERT_EQ(exprs.size(), 1u);
  const Polynomial one = Polynomial::constant(kN, 1.0);
  const Polynomial s13 = ops.s.at(13).fixed_value();
  const Polynomial lam4 = ops.lambda.at(4)[0].fixed_value();
  const Polynomial expected = -1.0 * (s13 * (one - ops.V.fixed_value())) - lam4 * ops.g[0] -
                              (ops.V_next.fixed_value() - one);
  EXPECT_LE(max_coeff_diff(exprs[0].fixed_value(), expected), 1e-14);
}

TEST_F(PsatzTest, ExpandInteriorThirdExpression) {
  const auto ops = operands();
  const auto exprs = assemble_psatz_constraint(PsatzTemplate::kExpandInterior, ops);
  ASSERT_EQ(exprs.size(), 3u);
  const Polynomial one = Polynomial::constant(kN, 1.0);
  const Polynomial expected = -1.0 * (ops.s.at(8).fixed_value() * (one - ops.V.fixed_value())) -
                              ops.s.at(9).fixed_value() * ops.Vdot.fixed_value() -
                              ops.lambda.at(3)[0].fixed_value() * ops.g[0];
  EXPECT_LE(max_coeff_diff(exprs[2].fixed_value(), expected), 1e-14);
}

TEST_F(PsatzTest, LocalContainmentExpressions) {
  const auto ops = operands();
  const auto exprs = assemble_psatz_constraint(PsatzTemplate::kLocalContainment, ops);
  ASSERT_EQ(exprs.size(), 2u);
  const Polynomial level = ops.c.fixed_value() - ops.V.fixed_value();
  const Polynomial excess = ops.p.fixed_value() - ops.beta.fixed_value();
  const Polynomial expected = -1.0 * (ops.s.at(1).fixed_value() * level) -
                              ops.s.at(2).fixed_value() * excess -
                              ops.s.at(3).fixed_value() * level * excess -
                              ops.lambda.at(1)[0].fixed_value() * ops.g[0] - excess * excess;
  EXPECT_LE(max_coeff_diff(exprs[0].fixed_value(), expected), 1e-14);
}

TEST_F(PsatzTest, EmptyConstraintListDropsLambdaTerms) {
  auto with_g = operands();
  auto without_g = operands();
  without_g.g.clear();
  without_g.lambda.clear();
  const auto a = assemble_psatz_constraint(PsatzTemplate::kSuccessorContainment, with_g);
  const auto b = assemble_psatz_constraint(PsatzTemplate::kSuccessorContainment, without_g);
  const Polynomial diff = a[0].fixed_value() - b[0].fixed_value();
  const Polynomial lam_g = -1.0 * (with_g.lambda.at(4)[0].fixed_value() * with_g.g[0]);
  EXPECT_LE(max_coeff_diff(diff, lam_g), 1e-14);
}

TEST_F(PsatzTest, ChartMismatchRejected) {
  auto ops = operands();
  ops.V_next = PolyExpr(Polynomial::variable(kN + 1, 0), "Vn");
  EXPECT_THROW(assemble_psatz_constraint(PsatzTemplate::kSuccessorContainment, ops),
               std::invalid_argument);
}

TEST_F(PsatzTest, DecisionVEqualsBilinearInInitialEstimateOnlyWhenMultiplierUnknown) {
  SosProgram prog(kN);
  auto ops = operands();
  ops.V = prog.new_free_polynomial("V", monomial_basis(kN, 2, true));
  ops.Vdot = PolyExpr(kN, "Vdot");
  // s2, s6 fixed: affine.
  EXPECT_NO_THROW(assemble_psatz_constraint(PsatzTemplate::kInitialEstimate, ops));
  // s2 unknown together with unknown beta: bilinear.
  ops.s[2] = prog.new_sos_multiplier("s2", 0);
  ops.beta = PolyExpr::constant(kN, prog.new_free_scalar("beta"), "beta");
  EXPECT_THROW(assemble_psatz_constraint(PsatzTemplate::kInitialEstimate, ops), BilinearError);
}

}  // namespace
}  // namespace csos::sos
