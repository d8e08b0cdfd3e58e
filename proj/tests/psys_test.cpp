#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "csos/psys.hpp"

namespace csos::psys {
namespace {

using cd = std::complex<double>;

NetworkModel two_bus_line() {
  NetworkModel net;
  net.buses = {{1, "pq"}, {2, "pq"}};
  net.branches = {{1, 2, 0.0, 0.1, 0.0}};
  return net;
}

// Three generators on a triangle of load buses with one renewable unit per
// load bus.
NetworkModel small_network() {
  NetworkModel net;
  net.buses = {{1, "pv"}, {2, "pv"}, {3, "pv"}, {4, "pq"}, {5, "pq"}, {6, "pq"}};
  net.branches = {{1, 4, 0.0, 0.05, 0.0}, {2, 5, 0.0, 0.05, 0.0}, {3, 6, 0.0, 0.05, 0.0},
                  {4, 5, 0.01, 0.1, 0.02}, {5, 6, 0.01, 0.1, 0.02}, {4, 6, 0.01, 0.1, 0.02}};
  net.generators = {{1, 0.1, 0.4, 1.05, 0.1, 0.6},
                    {2, 0.08, 0.32, 1.03, 0.12, 0.5},
                    {3, 0.12, 0.48, 1.0, 0.1, 0.4}};
  net.rg_units = {{1, 4, 0.3}, {2, 5, 0.3}, {3, 6, 0.3}};
  net.loads = {{4, 0.8, 0.1}, {5, 0.6, 0.1}, {6, 0.5, 0.05}};
  net.reference = 2;
  net.validate();
  return net;
}

ReducedSystem smib(double pm, double b) {
  // Two machines, equal inertia, opposite mechanical power: the relative
  // angle obeys  delta'' = 2 (pm - b sin delta) - lambda delta'.
  ReducedSystem sys;
  sys.sigma = SwitchingState();
  sys.G = Eigen::MatrixXd::Zero(2, 2);
  sys.B.resize(2, 2);
  sys.B << -b, b, b, -b;
  sys.E = Eigen::Vector2d(1.0, 1.0);
  sys.Pm = Eigen::Vector2d(pm, -pm);
  sys.M = Eigen::Vector2d(1.0, 1.0);
  sys.lambda = 1.0;
  return sys;
}

TEST(YbusTest, TwoBusLine) {
  const auto Y = build_ybus(two_bus_line(), SwitchingState());
  ASSERT_EQ(Y.rows(), 2);
  EXPECT_NEAR(std::abs(Y(0, 0) - cd(0, -10)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(Y(1, 1) - cd(0, -10)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(Y(0, 1) - cd(0, 10)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(Y(1, 0) - cd(0, 10)), 0.0, 1e-12);
}

TEST(YbusTest, AllOfflineMatchesNetworkWithoutUnits) {
  const auto net = small_network();
  auto bare = net;
  bare.rg_units.clear();
  const auto a = build_ybus(net, SwitchingState::from_id(8, 3));
  const auto b = build_ybus(bare, SwitchingState());
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
}

TEST(YbusTest, RowSumsEqualShunts) {
  auto net = small_network();
  for (auto& br : net.branches) br.r = 0.0;
  const auto sigma = SwitchingState::from_id(3, 3);  // 101
  const auto Y = build_ybus(net, sigma);
  const Eigen::VectorXcd rows = Y.rowwise().sum();
  std::vector<cd> shunt(Y.rows(), 0.0);
  for (const auto& br : net.branches) {
    shunt[br.from - 1] += cd(0, br.b / 2);
    shunt[br.to - 1] += cd(0, br.b / 2);
  }
  for (const auto& ld : net.loads) shunt[ld.bus - 1] += cd(ld.P, -ld.Q);
  for (const auto& rg : net.rg_units) {
    if (sigma.online(rg.id)) shunt[rg.bus - 1] += -rg.P;
  }
  for (int k = 0; k < Y.rows(); ++k) EXPECT_NEAR(std::abs(rows(k) - shunt[k]), 0.0, 1e-12) << k;
}

TEST(YbusTest, VoltageProfileScalesLoadAdmittance) {
  auto net = small_network();
  net.voltage_profile[4] = 2.0;
  const auto a = build_ybus(small_network(), SwitchingState::from_id(8, 3));
  const auto b = build_ybus(net, SwitchingState::from_id(8, 3));
  EXPECT_NEAR(std::abs((a(3, 3) - b(3, 3)) - cd(0.8, -0.1) * 0.75), 0.0, 1e-12);
}

TEST(KronTest, StarToDelta) {
  // Spokes of admittance y from nodes 0..2 to center 3.
  const cd y = 1.0 / cd(0, 0.1);
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(4, 4);
  for (int k = 0; k < 3; ++k) {
    Y(k, k) += y;
    Y(3, 3) += y;
    Y(k, 3) -= y;
    Y(3, k) -= y;
  }
  const auto R = kron_reduce(Y, {0, 1, 2});
  // Delta branches y*y/(3y) = y/3.
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const cd expect = i == j ? 2.0 * y / 3.0 : -y / 3.0;
      EXPECT_NEAR(std::abs(R(i, j) - expect), 0.0, 1e-12);
    }
  }
}

TEST(KronTest, NothingEliminatedIsIdentity) {
  const auto Y = build_ybus(small_network(), SwitchingState::from_id(1, 3));
  std::vector<int> all(Y.rows());
  for (int k = 0; k < Y.rows(); ++k) all[k] = k;
  EXPECT_EQ((kron_reduce(Y, all) - Y).cwiseAbs().maxCoeff(), 0.0);
}

TEST(KronTest, TerminalCurrentsPreserved) {
  const auto Y = build_ybus(small_network(), SwitchingState::from_id(2, 3));
  const std::vector<int> keep = {6, 7, 8};
  const std::vector<int> elim = {0, 1, 2, 3, 4, 5};
  const auto R = kron_reduce(Y, keep);
  Eigen::MatrixXcd Yee(6, 6), Yer(6, 3), Yre(3, 6), Yrr(3, 3);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) Yee(i, j) = Y(elim[i], elim[j]);
    for (int j = 0; j < 3; ++j) {
      Yer(i, j) = Y(elim[i], keep[j]);
      Yre(j, i) = Y(keep[j], elim[i]);
    }
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) Yrr(i, j) = Y(keep[i], keep[j]);
  }
  std::mt19937 rng(3);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXcd v(3);
    for (int k = 0; k < 3; ++k) v(k) = cd(n01(rng), n01(rng));
    // Zero injection at eliminated nodes.
    const Eigen::VectorXcd ve = Yee.fullPivLu().solve(-Yer * v);
    const Eigen::VectorXcd full = Yrr * v + Yre * ve;
    EXPECT_LE((full - R * v).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(KronTest, TwoStageEqualsOneStage) {
  const auto Y = build_ybus(small_network(), SwitchingState::from_id(5, 3));
  const auto one = kron_reduce(Y, {6, 7, 8});
  const auto mid = kron_reduce(Y, {0, 2, 4, 6, 7, 8});
  const auto two = kron_reduce(mid, {3, 4, 5});
  EXPECT_LE((one - two).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(KronTest, SingularPivotNamesNode) {
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(3, 3);
  Y(0, 0) = 1.0;
  Y(2, 2) = 1.0;
  try {
    kron_reduce(Y, {0, 2});
    FAIL();
  } catch (const NetworkError& e) {
    EXPECT_NE(std::string(e.what()).find("node 1"), std::string::npos) << e.what();
  }
}

TEST(NetworkTest, NonUniformDampingRejected) {
  auto net = small_network();
  net.generators[1].D *= 1.01;
  EXPECT_THROW(net.validate(), NetworkError);
}

TEST(NetworkTest, DisconnectedBusRejected) {
  auto net = small_network();
  net.buses.push_back({7, "pq"});
  EXPECT_THROW(net.validate(), NetworkError);
}

TEST(NetworkTest, ParseReportsMissingField) {
  const std::string doc = R"({"buses":[{"id":1},{"id":2}],"branches":[{"from":1,"to":2,"x":0.1}],
    "generators":[{"bus":1,"M":1,"D":4,"E":1,"xd":0.1,"Pm":0},{"bus":2,"D":4,"E":1,"xd":0.1,"Pm":0}]})";
  try {
    parse_network(doc);
    FAIL();
  } catch (const NetworkError& e) {
    EXPECT_NE(std::string(e.what()).find("generators[1].M"), std::string::npos) << e.what();
  }
}

TEST(NetworkTest, ParseRoundsTripFields) {
  const std::string doc = R"({"base_mva":100,"buses":[{"id":1},{"id":2}],
    "branches":[{"from":1,"to":2,"x":0.1,"b":0.02}],
    "generators":[{"bus":1,"M":1,"D":4,"E":1.1,"xd":0.1,"Pm":0.2},{"bus":2,"M":2,"D":8,"E":1,"xd":0.2,"Pm":-0.2}],
    "rg_units":[{"id":1,"bus":2,"P":0.3}],"loads":[{"bus":2,"P":0.5,"Q":0.1}],
    "options":{"reference_generator":1,"voltage_profile":{"2":1.02}}})";
  const auto net = parse_network(doc);
  EXPECT_EQ(net.reference, 0);
  EXPECT_EQ(net.num_rg(), 1);
  EXPECT_DOUBLE_EQ(net.generators[0].E, 1.1);
  EXPECT_DOUBLE_EQ(net.voltage_profile.at(2), 1.02);
  EXPECT_DOUBLE_EQ(net.damping_ratio(), 4.0);
}

TEST(SepTest, ZeroPowerGivesZeroAngle) {
  const auto sys = smib(0.0, 1.0);
  const auto sep = solve_sep(sys, Eigen::VectorXd::Constant(1, 0.3));
  EXPECT_NEAR(sep.delta(0), 0.0, 1e-12);
  EXPECT_TRUE(sep.stable);
}

TEST(SepTest, ClosedFormSmib) {
  const double pm = 0.6, b = 1.5;
  const auto sep = solve_sep(smib(pm, b), Eigen::VectorXd::Zero(1));
  EXPECT_NEAR(sep.delta(0), std::asin(pm / b), 1e-10);
  EXPECT_LE(sep.residual, 1e-10);
}

TEST(SepTest, NoEquilibriumThrows) {
  EXPECT_THROW(solve_sep(smib(2.0, 1.0), Eigen::VectorXd::Zero(1)), std::runtime_error);
}

TEST(SepTest, EveryStateOfSmallNetwork) {
  const auto net = small_network();
  for (int id = 1; id <= 8; ++id) {
    auto sys = reduce(net, SwitchingState::from_id(id, 3));
    EXPECT_TRUE(sys.G.isApprox(sys.G.transpose(), 1e-14));
    EXPECT_TRUE(sys.B.isApprox(sys.B.transpose(), 1e-14));
    const auto sep = solve_sep(sys, Eigen::VectorXd::Zero(2));
    EXPECT_LE(sep.residual, 1e-10);
    sys.sep = sep.delta;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
    x.head(2) = sep.delta;
    EXPECT_LE(vector_field(sys, x).lpNorm<Eigen::Infinity>(), 1e-9);
  }
}

class RecastTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto net = small_network();
    for (int id : {1, 6}) {
      auto sys = reduce(net, SwitchingState::from_id(id, 3));
      sys.sep = solve_sep(sys, Eigen::VectorXd::Zero(2)).delta;
      systems.push_back(sys);
    }
  }
  Eigen::VectorXd random_state(std::mt19937& rng) const {
    std::uniform_real_distribution<double> ang(-M_PI, M_PI), spd(-3, 3);
    return Eigen::Vector4d(ang(rng), ang(rng), spd(rng), spd(rng));
  }
  std::vector<ReducedSystem> systems;
};

TEST_F(RecastTest, SpeedOutputsEqualSpeedInputs) {
  std::mt19937 rng(5);
  const auto x = random_state(rng);
  const auto dx = vector_field(systems[0], x);
  EXPECT_EQ(dx(0), x(2));
  EXPECT_EQ(dx(1), x(3));
}

TEST_F(RecastTest, OriginIsEquilibriumAndDegreeTwo) {
  const auto rs = recast(systems[0]);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(6);
  for (const auto& fi : rs.f) {
    EXPECT_LE(std::abs(eval(fi, zero)), 1e-9);
    EXPECT_LE(fi.degree(), 2);
  }
  // d/dt (1 - cos theta) = sin(theta) * omega as a polynomial identity.
  const Polynomial expect = Polynomial::variable(6, rs.sin_index(1)) * Polynomial::variable(6, 1);
  EXPECT_EQ(rs.f[rs.cos_index(1)], expect);
}

TEST_F(RecastTest, MatchesPhysicalField) {
  std::mt19937 rng(9);
  for (const auto& sys : systems) {
    const auto rs = recast(sys);
    for (int k = 0; k < 100; ++k) {
      const auto x = random_state(rng);
      const auto z = to_chart(sys.sep, x);
      const auto dx = vector_field(sys, x);
      for (int i = 0; i < 2; ++i) {
        const double th = x(i) - sys.sep(i);
        EXPECT_NEAR(eval(rs.f[i], z), dx(2 + i), 1e-9);
        EXPECT_NEAR(eval(rs.f[rs.sin_index(i)], z), std::cos(th) * dx(i), 1e-9);
        EXPECT_NEAR(eval(rs.f[rs.cos_index(i)], z), std::sin(th) * dx(i), 1e-9);
        EXPECT_NEAR(eval(rs.g[i], z), 0.0, 1e-12);
      }
    }
  }
}

TEST_F(RecastTest, ChartRoundTrip) {
  std::mt19937 rng(13);
  for (int k = 0; k < 50; ++k) {
    const auto x = random_state(rng);
    const auto back = from_chart(systems[0].sep, to_chart(systems[0].sep, x));
    for (int i = 0; i < 2; ++i) {
      EXPECT_NEAR(std::remainder(back(i) - x(i), 2 * M_PI), 0.0, 1e-12);
      EXPECT_EQ(back(2 + i), x(2 + i));
    }
  }
}

TEST_F(RecastTest, ChartMapIdentityAndRoundTrip) {
  const auto& a = systems[0].sep;
  const auto& b = systems[1].sep;
  const auto id = chart_map(a, a);
  EXPECT_LE((id.A - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE(id.b.cwiseAbs().maxCoeff(), 0.0);
  const auto ab = chart_map(a, b);
  const auto ba = chart_map(b, a);
  EXPECT_LE((ba.A * ab.A - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((ba.A * ab.b + ba.b).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(std::abs(ab.A.determinant()), 1.0, 1e-12);
}

TEST_F(RecastTest, ChartMapCommutesWithRecasting) {
  std::mt19937 rng(17);
  const auto& a = systems[0].sep;
  const auto& b = systems[1].sep;
  const auto map = chart_map(a, b);
  for (int k = 0; k < 100; ++k) {
    const auto x = random_state(rng);
    EXPECT_LE((map.apply(to_chart(a, x)) - to_chart(b, x)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

}  // namespace
}  // namespace csos::psys
