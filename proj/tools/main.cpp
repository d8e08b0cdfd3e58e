#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "config.hpp"
#include "csos/psys.hpp"
#include "csos/sim.hpp"

namespace csos::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Context {
  RunConfig cfg;
  std::string hash;
  std::string certify_key;
  psys::NetworkModel net;
  int units = 0;
  cascade::Distribution dist;
};

std::string provenance(const Context& ctx) {
  return "# csos " CSOS_VERSION " config_hash=" + ctx.hash + " seed=" + std::to_string(ctx.cfg.seed);
}

json metadata(const Context& ctx) {
  return {{"tool", "csos"}, {"version", CSOS_VERSION}, {"config_hash", ctx.hash}, {"seed", ctx.cfg.seed}};
}

fs::path out_dir(const Context& ctx, const std::string& sub) {
  const fs::path p = fs::path(ctx.cfg.outdir) / sub;
  fs::create_directories(p);
  return p;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw CliError(kValidation, "outdir: cannot write '" + p.string() + "'");
  return out;
}

std::string file_stem(const std::string& name) {
  std::string s = name;
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return s;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Everything that can fail validation is checked here, before any output.
Context prepare(const RunConfig& cfg) {
  Context ctx;
  ctx.cfg = cfg;
  ctx.cfg.certify.seed = cfg.seed;
  ctx.hash = config_hash(cfg);
  try {
    std::ifstream in(cfg.system);
    if (!in) throw std::invalid_argument("cannot open system file '" + cfg.system + "'");
    std::stringstream text;
    text << in.rdbuf();
    ctx.net = psys::parse_network(text.str());
    ctx.certify_key = certify_key(cfg, text.str());
  } catch (const std::exception& e) {
    throw CliError(kValidation, std::string("system: ") + e.what());
  }
  ctx.units = ctx.net.num_rg();
  try {
    if (cfg.distribution.empty()) {
      ctx.dist = cascade::uniform_distribution(ctx.units);
    } else {
      std::ifstream in(cfg.distribution);
      if (!in) throw std::invalid_argument("cannot open '" + cfg.distribution + "'");
      ctx.dist = cascade::read_distribution(in, ctx.units);
    }
    cascade::validate_distribution(ctx.dist, 1e-9);
  } catch (const std::invalid_argument& e) {
    throw CliError(kValidation, std::string("distribution: ") + e.what());
  }
  for (const auto& b : cfg.blocking) {
    for (const auto& g : b.groups) {
      for (int u : g) {
        if (u < 1 || u > ctx.units) {
          throw CliError(kValidation, "blocking '" + b.name + "': unit " + std::to_string(u) + " out of range");
        }
      }
    }
  }
  return ctx;
}

std::map<int, certify::StageModel> stage_models(const Context& ctx) { return certify::build_stage_models(ctx.net); }

// Base sequences plus every blocked image.
std::set<cascade::TripOrder> needed_orders(const Context& ctx) {
  std::set<cascade::TripOrder> out;
  for (const auto& [order, p] : ctx.dist) out.insert(order);
  for (const auto& b : ctx.cfg.blocking) {
    for (const auto& [order, p] : cascade::reassign_probabilities(ctx.dist, ctx.units, b)) out.insert(order);
  }
  return out;
}

// Chains already on disk with the same certification inputs are reused.
certify::ChainSet chains(const Context& ctx, const std::map<int, certify::StageModel>& models) {
  const fs::path dir = out_dir(ctx, "certificates");
  const std::string key_line = "# certify_key=" + ctx.certify_key;
  certify::ChainSet set;
  std::vector<cascade::CascadeSequence> todo;
  for (const auto& order : needed_orders(ctx)) {
    const fs::path p = dir / (file_stem(cascade::trip_order_name(order)) + ".chain");
    std::ifstream in(p);
    std::string first, second;
    if (in && std::getline(in, first) && std::getline(in, second) && second == key_line) {
      set.emplace(order, certify::read_chain(in));
    } else {
      todo.push_back(cascade::make_sequence(ctx.units, order));
    }
  }
  if (todo.empty()) return set;
  for (auto& [order, chain] : certify::certify_all(todo, models, ctx.cfg.certify, ctx.cfg.jobs)) {
    auto out = open_out(dir / (file_stem(chain.name) + ".chain"));
    out << provenance(ctx) << "\n" << key_line << "\n";
    certify::write_chain(out, chain);
    set.emplace(order, std::move(chain));
  }
  return set;
}

std::vector<std::string> uncertifiable(const certify::ChainSet& set) {
  std::vector<std::string> out;
  for (const auto& [order, c] : set) {
    if (!c.certified) out.push_back(c.name);
  }
  return out;
}

json matrix_json(const Eigen::MatrixXd& a) {
  json rows = json::array();
  for (int i = 0; i < a.rows(); ++i) {
    std::vector<double> r(a.cols());
    for (int j = 0; j < a.cols(); ++j) r[j] = a(i, j);
    rows.push_back(r);
  }
  return rows;
}

std::vector<double> vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

int cmd_reduce(const Context& ctx) {
  const fs::path dir = out_dir(ctx, "models");
  for (int id = 1; id <= (1 << ctx.units); ++id) {
    const auto sigma = SwitchingState::from_id(id, ctx.units);
    const auto sys = psys::reduce(ctx.net, sigma);
    json j;
    j["metadata"] = metadata(ctx);
    j["state"] = id;
    j["status"] = sigma.status_string();
    j["G"] = matrix_json(sys.G);
    j["B"] = matrix_json(sys.B);
    j["E"] = vec(sys.E);
    j["Pm"] = vec(sys.Pm);
    j["M"] = vec(sys.M);
    j["lambda"] = sys.lambda;
    open_out(dir / ("state_" + std::to_string(id) + ".json")) << j.dump(2) << "\n";
  }
  return kOk;
}

int cmd_sep(const Context& ctx) {
  std::ostringstream out;
  out << provenance(ctx) << "\nstate,status";
  Eigen::VectorXd guess;
  std::vector<std::string> rows;
  int m = 0;
  for (int id = 1; id <= (1 << ctx.units); ++id) {
    const auto sigma = SwitchingState::from_id(id, ctx.units);
    const auto sys = psys::reduce(ctx.net, sigma);
    m = sys.dim();
    if (guess.size() == 0) guess = Eigen::VectorXd::Zero(m);
    psys::SepResult r;
    try {
      r = psys::solve_sep(sys, guess);
    } catch (const std::runtime_error& e) {
      throw CliError(kNumerical, "state " + std::to_string(id) + ": " + e.what());
    }
    if (id == 1) guess = r.delta;
    std::string row = std::to_string(id) + "," + sigma.status_string();
    for (int i = 0; i < m; ++i) row += "," + fmt(r.delta(i));
    row += "," + fmt(psys::mismatch(sys, r.delta).lpNorm<Eigen::Infinity>());
    row += "," + std::to_string(r.iterations) + "," + (r.stable ? "1" : "0");
    rows.push_back(row);
  }
  for (int i = 0; i < m; ++i) out << ",delta_" << i + 1;
  out << ",residual,iterations,stable\n";
  for (const auto& r : rows) out << r << "\n";
  open_out(out_dir(ctx, "models") / "sep_table.csv") << out.str();
  return kOk;
}

json chain_summary(const certify::ChainCertificate& c) {
  json j{{"sequence", c.name}, {"states", c.state_ids}, {"certified", c.certified}};
  if (!c.certified) {
    j["failing_state"] = c.failing_state;
    j["reason"] = c.reason;
  }
  json stages = json::array();
  for (auto it = c.stages.rbegin(); it != c.stages.rend(); ++it) {
    stages.push_back({{"state", it->state_id}, {"beta", it->beta_achieved}, {"c", it->diagnostics.c}});
  }
  j["stages"] = stages;
  return j;
}

int cmd_certify(const Context& ctx) {
  const auto set = chains(ctx, stage_models(ctx));
  json j;
  j["metadata"] = metadata(ctx);
  j["sequences"] = json::array();
  for (const auto& [order, c] : set) j["sequences"].push_back(chain_summary(c));
  open_out(out_dir(ctx, "certificates") / "summary.json") << j.dump(2) << "\n";
  const auto bad = uncertifiable(set);
  if (bad.empty()) return kOk;
  std::cerr << "uncertifiable sequences:";
  for (const auto& n : bad) std::cerr << " " << n;
  std::cerr << "\n";
  return kCertification;
}

void stamp(const Context& ctx, risk::RiskGrid& grid, const certify::ChainSet& set) {
  grid.metadata["tool"] = "csos";
  grid.metadata["version"] = CSOS_VERSION;
  grid.metadata["config_hash"] = ctx.hash;
  grid.metadata["seed"] = std::to_string(ctx.cfg.seed);
  std::string bad;
  for (const auto& n : uncertifiable(set)) bad += (bad.empty() ? "" : " ") + n;
  grid.metadata["uncertifiable"] = bad.empty() ? "none" : bad;
}

void write_grid(const Context& ctx, const fs::path& dir, const std::string& stem, const risk::RiskGrid& grid) {
  auto csv = open_out(dir / (stem + ".csv"));
  csv << provenance(ctx) << "\n";
  risk::write_grid_csv(csv, grid);
  auto meta = open_out(dir / (stem + ".json"));
  risk::write_grid_metadata(meta, grid);
}

struct RiskResults {
  risk::RiskGrid base;
  std::vector<risk::BlockingOutcome> options;
};

RiskResults compute_risk(const Context& ctx, const certify::ChainSet& set, int machines) {
  RiskResults r;
  r.base = risk::risk_grid(set, ctx.dist, ctx.cfg.grid, machines, ctx.cfg.jobs);
  stamp(ctx, r.base, set);
  r.base.metadata["blocking"] = "none";
  if (!ctx.cfg.blocking.empty()) {
    r.options = risk::compare_blocking(set, ctx.dist, ctx.units, ctx.cfg.blocking, ctx.cfg.grid, machines,
                                       ctx.cfg.jobs);
    for (auto& o : r.options) stamp(ctx, o.grid, set);
  }
  return r;
}

int cmd_risk(const Context& ctx) {
  const auto models = stage_models(ctx);
  const auto set = chains(ctx, models);
  const auto r = compute_risk(ctx, set, models.at(1).system.dim());
  const fs::path dir = out_dir(ctx, "risk");
  write_grid(ctx, dir, "base", r.base);
  auto summary = open_out(dir / "blocking_summary.csv");
  summary << provenance(ctx) << "\nrank,option,zero_cells,zero_fraction\n";
  summary << "0,base," << r.base.zero_cells() << "," << fmt(r.base.zero_fraction()) << "\n";
  for (size_t k = 0; k < r.options.size(); ++k) {
    const auto& o = r.options[k];
    write_grid(ctx, dir, "blocking_" + file_stem(o.blocking.name), o.grid);
    summary << k + 1 << "," << o.blocking.name << "," << o.grid.zero_cells() << "," << fmt(o.grid.zero_fraction())
            << "\n";
  }
  return kOk;
}

struct Run {
  sim::SwitchedTrajectory traj;
  std::vector<double> trace;
};

int cmd_simulate(const Context& ctx) {
  const auto models = stage_models(ctx);
  const auto set = chains(ctx, models);
  const fs::path dir = out_dir(ctx, "trajectories");
  const auto& sc = ctx.cfg.simulate;
  std::ostringstream summary;
  summary << provenance(ctx) << "\nsequence,run,verdict,final_error,final_speed\n";
  int failures = 0, index = 0;
  for (const auto& [order, chain] : set) {
    const int seq_index = index++;
    if (!chain.certified) continue;
    std::vector<psys::ReducedSystem> systems;
    std::vector<Polynomial> Vs;
    for (size_t k = 0; k < chain.state_ids.size(); ++k) {
      systems.push_back(models.at(chain.state_ids[k]).system);
      Vs.push_back(chain.stages[chain.stages.size() - 1 - k].V);
    }
    std::vector<Run> runs(sc.trajectories);
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int k = next++; k < sc.trajectories; k = next++) {
        std::seed_seq seq{static_cast<std::uint32_t>(ctx.cfg.seed), static_cast<std::uint32_t>(ctx.cfg.seed >> 32),
                          static_cast<std::uint32_t>(seq_index), static_cast<std::uint32_t>(k)};
        std::mt19937_64 rng(seq);
        const auto x0 = sim::boundary_sample(chain.innermost().V, chain.innermost().sep, 1, rng,
                                             ctx.cfg.certify.max_speed)[0];
        const auto times = sim::random_switch_times(static_cast<int>(order.size()), rng, sc.max_gap);
        sim::SwitchedOptions so;
        so.horizon = sc.horizon;
        runs[k].traj = sim::integrate_switched(systems, x0, times, so);
        if (k < sc.dump) runs[k].trace = sim::lyapunov_trace(runs[k].traj, systems, Vs);
      }
    };
    const int n = std::max(1, std::min(ctx.cfg.jobs, sc.trajectories));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (int k = 0; k < sc.trajectories; ++k) {
      const auto& tr = runs[k].traj;
      if (tr.verdict != sim::Verdict::kConverged) ++failures;
      summary << chain.name << "," << k << "," << sim::to_string(tr.verdict) << "," << fmt(tr.final_error) << ","
              << fmt(tr.final_speed) << "\n";
      if (k < sc.dump) {
        auto out = open_out(dir / (file_stem(chain.name) + "_run" + std::to_string(k) + ".csv"));
        out << provenance(ctx) << "\n";
        sim::write_trajectory_csv(out, tr, systems, runs[k].trace);
      }
    }
  }
  open_out(dir / "summary.csv") << summary.str();
  if (failures) throw CliError(kNumerical, std::to_string(failures) + " trajectories from certified sets did not converge");
  return kOk;
}

int cmd_report(const Context& ctx) {
  const auto models = stage_models(ctx);
  const auto set = chains(ctx, models);
  const auto r = compute_risk(ctx, set, models.at(1).system.dim());
  json j;
  j["metadata"] = metadata(ctx);
  j["sequences"] = json::array();
  std::ostringstream md;
  md << "# csos report\n\n"
     << "version " << CSOS_VERSION << ", config_hash " << ctx.hash << ", seed " << ctx.cfg.seed << "\n\n"
     << "## Sequences\n\n| sequence | probability | states | certified | innermost beta | note |\n"
     << "|---|---|---|---|---|---|\n";
  for (const auto& [order, c] : set) {
    j["sequences"].push_back(chain_summary(c));
    const auto p = ctx.dist.find(order);
    std::string states;
    for (int id : c.state_ids) states += (states.empty() ? "" : " > ") + std::to_string(id);
    md << "| " << c.name << " | " << (p == ctx.dist.end() ? std::string("-") : fmt(p->second)) << " | " << states
       << " | " << (c.certified ? "yes" : "no") << " | "
       << (c.certified ? fmt(c.innermost().beta_achieved) : std::string("-")) << " | "
       << (c.certified ? "" : "state " + std::to_string(c.failing_state) + ": " + c.reason + "; counted as risk 1")
       << " |\n";
  }
  md << "\n## Zero-risk area\n\n| rank | option | zero-risk cells | fraction |\n|---|---|---|---|\n";
  md << "| - | base | " << r.base.zero_cells() << " | " << fmt(r.base.zero_fraction()) << " |\n";
  j["zero_risk"] = json::array();
  j["zero_risk"].push_back({{"option", "base"}, {"zero_cells", r.base.zero_cells()},
                            {"zero_fraction", r.base.zero_fraction()}});
  for (size_t k = 0; k < r.options.size(); ++k) {
    const auto& o = r.options[k];
    md << "| " << k + 1 << " | " << o.blocking.name << " | " << o.grid.zero_cells() << " | "
       << fmt(o.grid.zero_fraction()) << " |\n";
    j["zero_risk"].push_back({{"option", o.blocking.name}, {"rank", k + 1}, {"zero_cells", o.grid.zero_cells()},
                              {"zero_fraction", o.grid.zero_fraction()}});
  }
  const fs::path dir = out_dir(ctx, "report");
  open_out(dir / "summary.md") << md.str();
  open_out(dir / "summary.json") << j.dump(2) << "\n";
  return kOk;
}

int dispatch(const std::string& cmd, const RunConfig& cfg) {
  const Context ctx = prepare(cfg);
  if (cmd == "reduce") return cmd_reduce(ctx);
  if (cmd == "sep") return cmd_sep(ctx);
  if (cmd == "certify") return cmd_certify(ctx);
  if (cmd == "risk") return cmd_risk(ctx);
  if (cmd == "simulate") return cmd_simulate(ctx);
  return cmd_report(ctx);
}

}  // namespace
}  // namespace csos::cli

int main(int argc, char** argv) {
  using namespace csos::cli;
  CLI::App app{"Cascade stability certification for power systems with renewable generation"};
  app.set_version_flag("--version", CSOS_VERSION);
  app.require_subcommand(1);

  std::string config_path, system, distribution, outdir;
  std::uint64_t seed = 0;
  int jobs = 0, grid_points = 0, trajectories = 0, dump = 0;
  struct Opts {
    CLI::Option *system, *distribution, *outdir, *seed, *jobs, *grid, *trajectories, *dump;
  };
  std::map<std::string, Opts> opts;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"reduce", "Kron-reduced model of every switching state"},
      {"sep", "Equilibrium table of every switching state"},
      {"certify", "Certificate chains for every cascade sequence"},
      {"risk", "Risk-of-instability grids and blocking comparison"},
      {"simulate", "Switched trajectories from the innermost certified boundaries"},
      {"report", "Human-readable summary of certification and risk"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    Opts o;
    o.system = sub->add_option("-s,--system", system, "Network JSON file");
    o.distribution = sub->add_option("--distribution", distribution, "Sequence probability table");
    o.outdir = sub->add_option("-o,--outdir", outdir, "Output directory");
    o.seed = sub->add_option("--seed", seed, "Master seed");
    o.jobs = sub->add_option("-j,--jobs", jobs, "Worker threads");
    o.grid = sub->add_option("--grid-points", grid_points, "Risk grid points per axis");
    o.trajectories = sub->add_option("--trajectories", trajectories, "Trajectories per certified sequence");
    o.dump = sub->add_option("--dump", dump, "Trajectories per sequence written as CSV");
    opts[name] = o;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kValidation;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  const Opts& o = opts.at(cmd);
  FlagOverrides f;
  if (o.system->count()) f.system = system;
  if (o.distribution->count()) f.distribution = distribution;
  if (o.outdir->count()) f.outdir = outdir;
  if (o.seed->count()) f.seed = seed;
  if (o.jobs->count()) f.jobs = jobs;
  if (o.grid->count()) f.grid_points = grid_points;
  if (o.trajectories->count()) f.trajectories = trajectories;
  if (o.dump->count()) f.dump = dump;
  try {
    return dispatch(cmd, load_config(config_path, f));
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code();
  } catch (const csos::certify::CertificationError& e) {
    std::cerr << "certification failure: " << e.what() << "\n";
    return kCertification;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
}
