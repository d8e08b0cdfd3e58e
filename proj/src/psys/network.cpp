#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "csos/psys.hpp"
#include "json.hpp"

namespace csos::psys {

using json = nlohmann::json;
using cd = std::complex<double>;

namespace {

double number(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw NetworkError(where + "." + key + " missing");
  if (!it->is_number()) throw NetworkError(where + "." + key + " is not a number");
  return it->get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
  return obj.contains(key) ? number(obj, key, where) : fallback;
}

int integer(const json& obj, const char* key, const std::string& where) {
  const double v = number(obj, key, where);
  if (v != std::floor(v)) throw NetworkError(where + "." + key + " is not an integer");
  return static_cast<int>(v);
}

const json& section(const json& doc, const char* key, bool required) {
  static const json empty = json::array();
  auto it = doc.find(key);
  if (it == doc.end()) {
    if (required) throw NetworkError(std::string("section '") + key + "' missing");
    return empty;
  }
  if (!it->is_array()) throw NetworkError(std::string("section '") + key + "' must be an array");
  return *it;
}

std::map<int, int> bus_index(const NetworkModel& net) {
  std::map<int, int> idx;
  for (size_t k = 0; k < net.buses.size(); ++k) idx[net.buses[k].id] = static_cast<int>(k);
  return idx;
}

int lookup(const std::map<int, int>& idx, int bus, const std::string& where) {
  auto it = idx.find(bus);
  if (it == idx.end()) throw NetworkError(where + " refers to unknown bus " + std::to_string(bus));
  return it->second;
}

}  // namespace

double NetworkModel::damping_ratio() const {
  if (generators.empty()) throw NetworkError("no generators");
  return generators[0].D / generators[0].M;
}

void NetworkModel::validate() const {
  if (buses.empty()) throw NetworkError("buses: empty");
  if (generators.size() < 2) throw NetworkError("generators: need at least two machines");
  if (reference < 0 || reference >= num_machines()) {
    throw NetworkError("options.reference_generator out of range");
  }
  const auto idx = bus_index(*this);
  if (idx.size() != buses.size()) throw NetworkError("buses: duplicate id");
  for (size_t k = 0; k < branches.size(); ++k) {
    const auto& br = branches[k];
    const std::string where = "branches[" + std::to_string(k) + "]";
    lookup(idx, br.from, where);
    lookup(idx, br.to, where);
    if (br.r == 0.0 && br.x == 0.0) throw NetworkError(where + " has zero impedance");
  }
  const double ratio = damping_ratio();
  for (size_t k = 0; k < generators.size(); ++k) {
    const auto& g = generators[k];
    const std::string where = "generators[" + std::to_string(k) + "]";
    lookup(idx, g.bus, where);
    if (g.M <= 0.0) throw NetworkError(where + ".M must be positive");
    if (g.xd <= 0.0) throw NetworkError(where + ".xd must be positive");
    if (g.E <= 0.0) throw NetworkError(where + ".E must be positive");
    if (std::abs(g.D / g.M - ratio) > damping_tolerance) {
      throw NetworkError(where + ": D/M = " + std::to_string(g.D / g.M) +
                         " differs from uniform damping " + std::to_string(ratio));
    }
  }
  for (size_t k = 0; k < rg_units.size(); ++k) {
    const std::string where = "rg_units[" + std::to_string(k) + "]";
    if (rg_units[k].id != static_cast<int>(k) + 1) throw NetworkError(where + ".id must be " + std::to_string(k + 1));
    lookup(idx, rg_units[k].bus, where);
  }
  for (size_t k = 0; k < loads.size(); ++k) lookup(idx, loads[k].bus, "loads[" + std::to_string(k) + "]");
  for (const auto& [bus, v] : voltage_profile) {
    lookup(idx, bus, "options.voltage_profile");
    if (v <= 0.0) throw NetworkError("options.voltage_profile: nonpositive magnitude");
  }

  // Connectivity over the bus graph.
  std::vector<std::vector<int>> adj(buses.size());
  for (const auto& br : branches) {
    const int a = idx.at(br.from), b = idx.at(br.to);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<bool> seen(buses.size(), false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        q.push(v);
      }
    }
  }
  for (size_t k = 0; k < buses.size(); ++k) {
    if (!seen[k]) throw NetworkError("bus " + std::to_string(buses[k].id) + " is disconnected");
  }
}

NetworkModel parse_network(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw NetworkError(std::string("system file: ") + e.what());
  }
  if (!doc.is_object()) throw NetworkError("system file: top level must be an object");
  NetworkModel net;
  net.base_mva = number_or(doc, "base_mva", 100.0, "system");
  const auto& buses = section(doc, "buses", true);
  for (size_t k = 0; k < buses.size(); ++k) {
    const std::string where = "buses[" + std::to_string(k) + "]";
    net.buses.push_back({integer(buses[k], "id", where), buses[k].value("type", "pq")});
  }
  const auto& branches = section(doc, "branches", true);
  for (size_t k = 0; k < branches.size(); ++k) {
    const std::string where = "branches[" + std::to_string(k) + "]";
    const auto& b = branches[k];
    net.branches.push_back({integer(b, "from", where), integer(b, "to", where),
                            number_or(b, "r", 0.0, where), number(b, "x", where),
                            number_or(b, "b", 0.0, where)});
  }
  const auto& gens = section(doc, "generators", true);
  for (size_t k = 0; k < gens.size(); ++k) {
    const std::string where = "generators[" + std::to_string(k) + "]";
    const auto& g = gens[k];
    net.generators.push_back({integer(g, "bus", where), number(g, "M", where), number(g, "D", where),
                              number(g, "E", where), number(g, "xd", where), number(g, "Pm", where)});
  }
  const auto& rgs = section(doc, "rg_units", false);
  for (size_t k = 0; k < rgs.size(); ++k) {
    const std::string where = "rg_units[" + std::to_string(k) + "]";
    net.rg_units.push_back({integer(rgs[k], "id", where), integer(rgs[k], "bus", where),
                            number(rgs[k], "P", where)});
  }
  std::sort(net.rg_units.begin(), net.rg_units.end(),
            [](const RgUnit& a, const RgUnit& b) { return a.id < b.id; });
  const auto& loads = section(doc, "loads", false);
  for (size_t k = 0; k < loads.size(); ++k) {
    const std::string where = "loads[" + std::to_string(k) + "]";
    net.loads.push_back({integer(loads[k], "bus", where), number(loads[k], "P", where),
                         number_or(loads[k], "Q", 0.0, where)});
  }
  net.reference = static_cast<int>(net.generators.size()) - 1;
  if (auto it = doc.find("options"); it != doc.end()) {
    const auto& opt = *it;
    if (!opt.is_object()) throw NetworkError("options must be an object");
    if (opt.contains("reference_generator")) {
      net.reference = integer(opt, "reference_generator", "options") - 1;
    }
    net.damping_tolerance = number_or(opt, "damping_tolerance", 1e-9, "options");
    if (auto vp = opt.find("voltage_profile"); vp != opt.end()) {
      if (!vp->is_object()) throw NetworkError("options.voltage_profile must map bus id to magnitude");
      for (const auto& [key, val] : vp->items()) {
        if (!val.is_number()) throw NetworkError("options.voltage_profile." + key + " is not a number");
        net.voltage_profile[std::stoi(key)] = val.get<double>();
      }
    }
  }
  net.validate();
  return net;
}

NetworkModel load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NetworkError("cannot open system file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_network(ss.str());
}

Eigen::MatrixXcd build_ybus(const NetworkModel& net, const SwitchingState& sigma) {
  if (sigma.size() != net.num_rg()) {
    throw NetworkError("switching state has " + std::to_string(sigma.size()) + " units, network has " +
                       std::to_string(net.num_rg()));
  }
  const auto idx = bus_index(net);
  const int nb = static_cast<int>(net.buses.size());
  const int ng = net.num_machines();
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(nb + ng, nb + ng);
  auto connect = [&](int a, int b, cd y) {
    Y(a, a) += y;
    Y(b, b) += y;
    Y(a, b) -= y;
    Y(b, a) -= y;
  };
  for (const auto& br : net.branches) {
    const int a = idx.at(br.from), b = idx.at(br.to);
    connect(a, b, 1.0 / cd(br.r, br.x));
    Y(a, a) += cd(0.0, br.b / 2.0);
    Y(b, b) += cd(0.0, br.b / 2.0);
  }
  for (int k = 0; k < ng; ++k) {
    connect(nb + k, idx.at(net.generators[k].bus), 1.0 / cd(0.0, net.generators[k].xd));
  }
  auto v2 = [&](int bus) {
    auto it = net.voltage_profile.find(bus);
    const double v = it == net.voltage_profile.end() ? 1.0 : it->second;
    return v * v;
  };
  for (const auto& ld : net.loads) Y(idx.at(ld.bus), idx.at(ld.bus)) += cd(ld.P, -ld.Q) / v2(ld.bus);
  for (const auto& rg : net.rg_units) {
    if (sigma.online(rg.id)) Y(idx.at(rg.bus), idx.at(rg.bus)) += cd(-rg.P, 0.0) / v2(rg.bus);
  }
  return Y;
}

Eigen::MatrixXcd kron_reduce(const Eigen::MatrixXcd& ybus, const std::vector<int>& retained,
                             double pivot_tolerance) {
  const int n = static_cast<int>(ybus.rows());
  std::vector<bool> keep(n, false);
  for (int r : retained) {
    if (r < 0 || r >= n) throw NetworkError("kron_reduce: retained index out of range");
    keep[r] = true;
  }
  Eigen::MatrixXcd Y = ybus;
  for (int k = 0; k < n; ++k) {
    if (keep[k]) continue;
    const cd pivot = Y(k, k);
    if (std::abs(pivot) < pivot_tolerance) {
      throw NetworkError("kron_reduce: singular pivot at node " + std::to_string(k) +
                         " (|Y_kk| = " + std::to_string(std::abs(pivot)) + ")");
    }
    const Eigen::VectorXcd col = Y.col(k);
    const Eigen::RowVectorXcd row = Y.row(k) / pivot;
    Y.noalias() -= col * row;
    Y.row(k).setZero();
    Y.col(k).setZero();
  }
  Eigen::MatrixXcd out(retained.size(), retained.size());
  for (size_t i = 0; i < retained.size(); ++i) {
    for (size_t j = 0; j < retained.size(); ++j) out(i, j) = Y(retained[i], retained[j]);
  }
  return out;
}

ReducedSystem reduce(const NetworkModel& net, const SwitchingState& sigma) {
  const int nb = static_cast<int>(net.buses.size());
  const int ng = net.num_machines();
  // Reference machine goes last.
  std::vector<int> order;
  for (int k = 0; k < ng; ++k) {
    if (k != net.reference) order.push_back(k);
  }
  order.push_back(net.reference);
  std::vector<int> retained;
  for (int k : order) retained.push_back(nb + k);
  const Eigen::MatrixXcd Yr = kron_reduce(build_ybus(net, sigma), retained);
  ReducedSystem sys;
  sys.sigma = sigma;
  sys.G = Yr.real();
  sys.B = Yr.imag();
  sys.E.resize(ng);
  sys.Pm.resize(ng);
  sys.M.resize(ng);
  for (int i = 0; i < ng; ++i) {
    const auto& g = net.generators[order[i]];
    sys.E(i) = g.E;
    sys.Pm(i) = g.Pm;
    sys.M(i) = g.M;
  }
  sys.lambda = net.damping_ratio();
  return sys;
}

}  // namespace csos::psys
