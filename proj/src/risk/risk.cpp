#include "csos/risk.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace csos::risk {

using json = nlohmann::json;

namespace {

constexpr double kProbabilityTolerance = 1e-9;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) out[k] = n == 1 ? lo : lo + (hi - lo) * k / (n - 1);
  return out;
}

// Indicator weights in distribution order; uncertifiable chains never
// contain anything.
struct Weighted {
  const certify::ChainCertificate* chain;
  double p;
};

std::vector<Weighted> prepare(const certify::ChainSet& chains, const cascade::Distribution& dist) {
  cascade::validate_distribution(dist, kProbabilityTolerance);
  std::vector<Weighted> out;
  for (const auto& [order, p] : dist) {
    const auto it = chains.find(order);
    if (it == chains.end()) {
      throw std::invalid_argument("no certificate chain for sequence " + cascade::trip_order_name(order));
    }
    out.push_back({&it->second, p});
  }
  return out;
}

double evaluate(const Eigen::VectorXd& x0, const std::vector<Weighted>& items) {
  double r = 0.0;
  for (const auto& w : items) {
    if (!w.chain->certified || certify::innermost_level(*w.chain, x0) > 1.0) r += w.p;
  }
  return std::clamp(r, 0.0, 1.0);
}

std::string describe(const cascade::Distribution& dist) {
  std::ostringstream out;
  cascade::write_distribution(out, dist);
  return out.str();
}

std::string describe(const cascade::BlockingLogic& b) {
  std::string s = b.name.empty() ? "none" : b.name;
  for (const auto& g : b.groups) {
    s += " {";
    for (size_t k = 0; k < g.size(); ++k) s += (k ? "," : "") + std::to_string(g[k]);
    s += "}";
  }
  return s;
}

}  // namespace

double risk_at(const Eigen::VectorXd& x0, const certify::ChainSet& chains, const cascade::Distribution& dist) {
  return evaluate(x0, prepare(chains, dist));
}

std::vector<double> GridSpec::axis1() const { return linspace(lo1, hi1, n1); }
std::vector<double> GridSpec::axis2() const { return linspace(lo2, hi2, n2); }

Eigen::VectorXd GridSpec::state(int i, int j, int m) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * m);
  if (base_angles.size() == m) x.head(m) = base_angles;
  if (speeds.size() == m) x.tail(m) = speeds;
  x(0) = n1 == 1 ? lo1 : lo1 + (hi1 - lo1) * i / (n1 - 1);
  if (m > 1) x(1) = n2 == 1 ? lo2 : lo2 + (hi2 - lo2) * j / (n2 - 1);
  return x;
}

int RiskGrid::zero_cells() const { return static_cast<int>((values.array() == 0.0).count()); }

double RiskGrid::zero_fraction() const {
  return values.size() == 0 ? 0.0 : static_cast<double>(zero_cells()) / static_cast<double>(values.size());
}

RiskGrid risk_grid(const certify::ChainSet& chains, const cascade::Distribution& dist, const GridSpec& spec,
                   int machines, int jobs) {
  if (spec.n1 < 1 || spec.n2 < 1) throw std::invalid_argument("grid resolution must be positive");
  const auto items = prepare(chains, dist);
  RiskGrid grid;
  grid.spec = spec;
  grid.machines = machines;
  grid.values.resize(spec.n1, spec.n2);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < spec.n1; i = next++) {
      for (int j = 0; j < spec.n2; ++j) grid.values(i, j) = evaluate(spec.state(i, j, machines), items);
    }
  };
  const int n = std::max(1, std::min(jobs, spec.n1));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  grid.metadata["distribution"] = describe(dist);
  return grid;
}

void write_grid_csv(std::ostream& out, const RiskGrid& grid) {
  out << "delta_1\\delta_2";
  for (double v : grid.spec.axis2()) out << "," << fmt(v);
  out << "\n";
  const auto a1 = grid.spec.axis1();
  for (int i = 0; i < grid.values.rows(); ++i) {
    out << fmt(a1[i]);
    for (int j = 0; j < grid.values.cols(); ++j) out << "," << fmt(grid.values(i, j));
    out << "\n";
  }
}

void write_grid_metadata(std::ostream& out, const RiskGrid& grid) {
  const auto& s = grid.spec;
  json doc;
  doc["axes"] = {{"delta_1", {{"lo", s.lo1}, {"hi", s.hi1}, {"points", s.n1}}},
                 {"delta_2", {{"lo", s.lo2}, {"hi", s.hi2}, {"points", s.n2}}}};
  doc["relative_angles"] = grid.machines;
  doc["base_angles"] = std::vector<double>(s.base_angles.data(), s.base_angles.data() + s.base_angles.size());
  doc["speeds"] = std::vector<double>(s.speeds.data(), s.speeds.data() + s.speeds.size());
  doc["zero_risk_fraction"] = grid.zero_fraction();
  doc["metadata"] = grid.metadata;
  out << doc.dump(2) << "\n";
}

RiskGrid read_grid_metadata(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("grid metadata: ") + e.what());
  }
  RiskGrid grid;
  auto& s = grid.spec;
  const auto& a = doc.at("axes");
  s.lo1 = a.at("delta_1").at("lo");
  s.hi1 = a.at("delta_1").at("hi");
  s.n1 = a.at("delta_1").at("points");
  s.lo2 = a.at("delta_2").at("lo");
  s.hi2 = a.at("delta_2").at("hi");
  s.n2 = a.at("delta_2").at("points");
  grid.machines = doc.at("relative_angles");
  const auto base = doc.at("base_angles").get<std::vector<double>>();
  s.base_angles = Eigen::Map<const Eigen::VectorXd>(base.data(), static_cast<Eigen::Index>(base.size()));
  const auto speeds = doc.at("speeds").get<std::vector<double>>();
  s.speeds = Eigen::Map<const Eigen::VectorXd>(speeds.data(), static_cast<Eigen::Index>(speeds.size()));
  grid.metadata = doc.at("metadata").get<std::map<std::string, std::string>>();
  return grid;
}

std::vector<BlockingOutcome> compare_blocking(const certify::ChainSet& chains, const cascade::Distribution& base,
                                              int num_units, const std::vector<cascade::BlockingLogic>& options,
                                              const GridSpec& spec, int machines, int jobs) {
  std::vector<BlockingOutcome> out;
  for (const auto& b : options) {
    BlockingOutcome o;
    o.blocking = b;
    o.distribution = cascade::reassign_probabilities(base, num_units, b);
    o.grid = risk_grid(chains, o.distribution, spec, machines, jobs);
    o.grid.metadata["blocking"] = describe(b);
    out.push_back(std::move(o));
  }
  std::stable_sort(out.begin(), out.end(), [](const BlockingOutcome& a, const BlockingOutcome& b) {
    const int za = a.grid.zero_cells(), zb = b.grid.zero_cells();
    if (za != zb) return za > zb;
    return a.blocking.name < b.blocking.name;
  });
  return out;
}

}  // namespace csos::risk
