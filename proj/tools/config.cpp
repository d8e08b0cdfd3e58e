#include "config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace csos::cli {

using json = nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw CliError(kValidation, "config field '" + field + "': " + why);
}

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) invalid(where, "expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) invalid(where.empty() ? k : where + "." + k, "unknown key");
  }
}

template <typename T>
void read(const json& obj, const std::string& key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    invalid(where.empty() ? key : where + "." + key, "wrong type");
  }
}

Eigen::VectorXd read_vector(const json& obj, const std::string& key, const std::string& where,
                            const Eigen::VectorXd& fallback) {
  std::vector<double> v;
  if (!obj.contains(key)) return fallback;
  read(obj, key, where, v);
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void apply_file(const json& doc, RunConfig& cfg) {
  check_keys(doc, "", {"system", "distribution", "blocking", "degrees", "tolerances", "certify", "grid",
                       "simulate", "outdir", "seed", "jobs"});
  read(doc, "system", "", cfg.system);
  read(doc, "distribution", "", cfg.distribution);
  read(doc, "outdir", "", cfg.outdir);
  read(doc, "seed", "", cfg.seed);
  read(doc, "jobs", "", cfg.jobs);
  if (doc.contains("blocking")) {
    const auto& list = doc.at("blocking");
    if (!list.is_array()) invalid("blocking", "expected an array");
    for (size_t k = 0; k < list.size(); ++k) {
      const std::string where = "blocking[" + std::to_string(k) + "]";
      check_keys(list[k], where, {"name", "groups"});
      cascade::BlockingLogic b;
      read(list[k], "name", where, b.name);
      read(list[k], "groups", where, b.groups);
      if (b.name.empty()) invalid(where + ".name", "missing");
      cfg.blocking.push_back(b);
    }
  }
  if (doc.contains("degrees")) {
    const auto& d = doc.at("degrees");
    auto& g = cfg.certify.degrees;
    check_keys(d, "degrees", {"V", "s1", "s2", "s3", "s4", "s6", "s8", "s13", "lambda", "lambda_decrease",
                              "lambda_containment"});
    read(d, "V", "degrees", g.V);
    read(d, "s1", "degrees", g.s1);
    read(d, "s2", "degrees", g.s2);
    read(d, "s3", "degrees", g.s3);
    read(d, "s4", "degrees", g.s4);
    read(d, "s6", "degrees", g.s6);
    read(d, "s8", "degrees", g.s8);
    read(d, "s13", "degrees", g.s13);
    read(d, "lambda", "degrees", g.lambda);
    read(d, "lambda_decrease", "degrees", g.lambda_decrease);
    read(d, "lambda_containment", "degrees", g.lambda_containment);
  }
  if (doc.contains("tolerances")) {
    const auto& t = doc.at("tolerances");
    auto& o = cfg.certify;
    check_keys(t, "tolerances", {"margin", "sample_tolerance", "expand_tolerance", "acceptable_residual",
                                 "sdp_tolerance", "l_epsilon"});
    read(t, "margin", "tolerances", o.margin);
    read(t, "sample_tolerance", "tolerances", o.sample_tolerance);
    read(t, "expand_tolerance", "tolerances", o.expand_tolerance);
    read(t, "acceptable_residual", "tolerances", o.acceptable_residual);
    read(t, "sdp_tolerance", "tolerances", o.sdp.tolerance);
    read(t, "l_epsilon", "tolerances", o.l_epsilon);
  }
  if (doc.contains("certify")) {
    const auto& c = doc.at("certify");
    auto& o = cfg.certify;
    check_keys(c, "certify", {"samples", "bisection_steps", "max_inner", "max_outer", "beta_max", "max_speed"});
    read(c, "samples", "certify", o.samples);
    read(c, "bisection_steps", "certify", o.bisection_steps);
    read(c, "max_inner", "certify", o.max_inner);
    read(c, "max_outer", "certify", o.max_outer);
    read(c, "beta_max", "certify", o.beta_max);
    read(c, "max_speed", "certify", o.max_speed);
  }
  if (doc.contains("grid")) {
    const auto& g = doc.at("grid");
    check_keys(g, "grid", {"lo1", "hi1", "lo2", "hi2", "n1", "n2", "speeds", "base_angles"});
    read(g, "lo1", "grid", cfg.grid.lo1);
    read(g, "hi1", "grid", cfg.grid.hi1);
    read(g, "lo2", "grid", cfg.grid.lo2);
    read(g, "hi2", "grid", cfg.grid.hi2);
    read(g, "n1", "grid", cfg.grid.n1);
    read(g, "n2", "grid", cfg.grid.n2);
    cfg.grid.speeds = read_vector(g, "speeds", "grid", cfg.grid.speeds);
    cfg.grid.base_angles = read_vector(g, "base_angles", "grid", cfg.grid.base_angles);
  }
  if (doc.contains("simulate")) {
    const auto& s = doc.at("simulate");
    check_keys(s, "simulate", {"trajectories", "max_gap", "horizon", "dump"});
    read(s, "trajectories", "simulate", cfg.simulate.trajectories);
    read(s, "max_gap", "simulate", cfg.simulate.max_gap);
    read(s, "horizon", "simulate", cfg.simulate.horizon);
    read(s, "dump", "simulate", cfg.simulate.dump);
  }
}

}  // namespace

RunConfig load_config(const std::string& path, const FlagOverrides& flags) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw CliError(kValidation, "config: cannot open '" + path + "'");
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw CliError(kValidation, std::string("config: ") + e.what());
    }
    apply_file(doc, cfg);
  }
  if (flags.system) cfg.system = *flags.system;
  if (flags.distribution) cfg.distribution = *flags.distribution;
  if (flags.outdir) cfg.outdir = *flags.outdir;
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.jobs) cfg.jobs = *flags.jobs;
  if (flags.grid_points) cfg.grid.n1 = cfg.grid.n2 = *flags.grid_points;
  if (flags.trajectories) cfg.simulate.trajectories = *flags.trajectories;
  if (flags.dump) cfg.simulate.dump = *flags.dump;
  validate(cfg);
  return cfg;
}

void validate(const RunConfig& cfg) {
  if (cfg.system.empty()) invalid("system", "missing");
  if (cfg.outdir.empty()) invalid("outdir", "empty");
  if (cfg.jobs < 1) invalid("jobs", "must be at least 1");
  const auto& o = cfg.certify;
  const std::pair<const char*, double> positive[] = {
      {"tolerances.margin", o.margin},
      {"tolerances.sample_tolerance", o.sample_tolerance},
      {"tolerances.expand_tolerance", o.expand_tolerance},
      {"tolerances.acceptable_residual", o.acceptable_residual},
      {"tolerances.sdp_tolerance", o.sdp.tolerance},
      {"tolerances.l_epsilon", o.l_epsilon},
      {"certify.beta_max", o.beta_max},
      {"certify.max_speed", o.max_speed},
      {"simulate.max_gap", cfg.simulate.max_gap},
      {"simulate.horizon", cfg.simulate.horizon},
  };
  for (const auto& [name, v] : positive) {
    if (!(v > 0.0)) invalid(name, "must be positive");
  }
  if (o.samples < 1) invalid("certify.samples", "must be positive");
  if (o.degrees.V < 2 || o.degrees.V % 2) invalid("degrees.V", "must be even and at least 2");
  if (cfg.grid.n1 < 1) invalid("grid.n1", "must be positive");
  if (cfg.grid.n2 < 1) invalid("grid.n2", "must be positive");
  if (!(cfg.grid.lo1 < cfg.grid.hi1)) invalid("grid.hi1", "must exceed lo1");
  if (!(cfg.grid.lo2 < cfg.grid.hi2)) invalid("grid.hi2", "must exceed lo2");
  if (cfg.simulate.trajectories < 0) invalid("simulate.trajectories", "must be nonnegative");
  if (cfg.simulate.dump < 0) invalid("simulate.dump", "must be nonnegative");
  std::set<std::string> names;
  for (const auto& b : cfg.blocking) {
    if (!names.insert(b.name).second) invalid("blocking", "duplicate option name '" + b.name + "'");
  }
}

json effective_config(const RunConfig& cfg) {
  const auto& o = cfg.certify;
  const auto& d = o.degrees;
  json j;
  j["system"] = cfg.system;
  j["distribution"] = cfg.distribution;
  j["seed"] = cfg.seed;
  j["blocking"] = json::array();
  for (const auto& b : cfg.blocking) j["blocking"].push_back({{"name", b.name}, {"groups", b.groups}});
  j["degrees"] = {{"V", d.V},     {"s1", d.s1},       {"s2", d.s2},
                  {"s3", d.s3},   {"s4", d.s4},       {"s6", d.s6},
                  {"s8", d.s8},   {"s13", d.s13},     {"lambda", d.lambda},
                  {"lambda_decrease", d.lambda_decrease}, {"lambda_containment", d.lambda_containment}};
  j["tolerances"] = {{"margin", o.margin},
                     {"sample_tolerance", o.sample_tolerance},
                     {"expand_tolerance", o.expand_tolerance},
                     {"acceptable_residual", o.acceptable_residual},
                     {"sdp_tolerance", o.sdp.tolerance},
                     {"l_epsilon", o.l_epsilon}};
  j["certify"] = {{"samples", o.samples},     {"bisection_steps", o.bisection_steps},
                  {"max_inner", o.max_inner}, {"max_outer", o.max_outer},
                  {"beta_max", o.beta_max},   {"max_speed", o.max_speed}};
  const auto& g = cfg.grid;
  j["grid"] = {{"lo1", g.lo1}, {"hi1", g.hi1}, {"lo2", g.lo2}, {"hi2", g.hi2}, {"n1", g.n1}, {"n2", g.n2},
               {"speeds", std::vector<double>(g.speeds.data(), g.speeds.data() + g.speeds.size())},
               {"base_angles",
                std::vector<double>(g.base_angles.data(), g.base_angles.data() + g.base_angles.size())}};
  const auto& s = cfg.simulate;
  j["simulate"] = {{"trajectories", s.trajectories}, {"max_gap", s.max_gap}, {"horizon", s.horizon},
                   {"dump", s.dump}};
  return j;
}

std::string fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const RunConfig& cfg) { return fnv1a(effective_config(cfg).dump()); }

std::string certify_key(const RunConfig& cfg, const std::string& system_text) {
  const json full = effective_config(cfg);
  json j;
  for (const char* k : {"seed", "degrees", "tolerances", "certify"}) j[k] = full.at(k);
  return fnv1a(j.dump() + "\n" + system_text);
}

}  // namespace csos::cli
