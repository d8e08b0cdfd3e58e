#pragma once

// Nested Lyapunov level sets along a cascade sequence.
//
// Each switching state gets a quadratic V in its own chart with
// {V <= 1} positively invariant; the chain is built backwards from the last
// state so that every set sits inside its successor's set.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csos/cascade.hpp"
#include "csos/polynomial.hpp"
#include "csos/psys.hpp"
#include "csos/sdp.hpp"

namespace csos::certify {

class CertificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Polynomial vector field z' = f(z) with equality constraints g(z) = 0.
// angles > 0 selects the recast chart layout (speeds, then sin/cos pairs);
// angles == 0 means plain coordinates with no constraints.
struct PolySystem {
  std::vector<Polynomial> f;
  std::vector<Polynomial> g;
  int angles = 0;

  int nvars() const { return static_cast<int>(f.size()); }
  // Dimension of the sampling parameters: (theta, omega) or z itself.
  int param_dim() const { return angles > 0 ? 2 * angles : nvars(); }
  Eigen::VectorXd lift(const Eigen::VectorXd& u) const;

  static PolySystem from_recast(const psys::RecastSystem& rs);
};

// Multiplier degrees. s-names follow the constraint lists of the four
// P-satz templates.
struct Degrees {
  int V = 2;
  int s1 = 2;
  int s2 = 0;
  int s3 = 0;
  int s4 = 0;
  int s6 = 2;   // vanishes at the origin
  int s8 = 2;   // vanishes at the origin
  int s13 = 0;
  int lambda = 0;
  // Degree of lambda in constraints whose constant coefficient is zero.
  int lambda_decrease = 2;
  // Degree of lambda against the quartic (p - beta)^2 containment term.
  int lambda_containment = 2;
};

struct CertifyOptions {
  Degrees degrees;
  double beta_min = 1e-6;
  double beta_max = 1e3;
  double c_min = 1e-6;
  double c_max = 1e2;
  int bisection_steps = 40;
  // Relative beta improvement that ends an inner (or outer) expansion loop.
  double expand_tolerance = 1e-3;
  int max_inner = 20;
  int max_outer = 8;
  double l_epsilon = 1e-6;  // l = l_epsilon * |z|^2
  // V is multiplied by 1 + margin before sampling checks.
  double margin = 1e-6;
  int samples = 10000;
  double sample_tolerance = 1e-8;
  double max_speed = 50.0;
  double max_radius = 1e3;  // plain coordinates
  std::uint64_t seed = 1;
  // Residual accepted from a non-converged solve in the maximization steps.
  double acceptable_residual = 1e-8;
  sdp::SolveOptions sdp = default_sdp_options();

  static sdp::SolveOptions default_sdp_options();
};

struct InitialEstimate {
  Polynomial V;
  double beta = 0.0;
  int solves = 0;
  double residual = 0.0;
};

struct Containment {
  Polynomial V;  // rescaled to level 1
  double c = 0.0;
  int solves = 0;
  double residual = 0.0;
};

struct Expansion {
  Polynomial V;
  Polynomial p;           // shape after the last replacement
  double beta = 0.0;      // relative to p
  std::vector<double> history;  // beta after each accepted inner iterate
  int inner = 0;
  int outer = 0;
  double residual = 0.0;
  std::string note;       // set when the alternation stalled
};

struct SampleCheck {
  int samples = 0;
  int positivity_violations = 0;
  int decrease_violations = 0;
  int nesting_violations = 0;
  double max_successor = 0.0;  // max V_next over the samples
  bool passed() const {
    return positivity_violations == 0 && decrease_violations == 0 && nesting_violations == 0;
  }
};

// Quadratic shape from the linearization: z_T' P z_T with A'P + PA = -I on
// the tangent coordinates, plus the squared cos-type coordinates. Throws
// CertificationError if the linearization is not Hurwitz.
Polynomial shape_function(const PolySystem& sys);

// Largest beta such that V, -V-dot are positive on {p <= beta}. Throws
// CertificationError("no certificate at requested degree") when beta_min
// fails.
InitialEstimate initial_estimate(const PolySystem& sys, const Polynomial& p,
                                 const CertifyOptions& options = {});

// Largest c with {V <= c} inside {p <= beta} and, when V_next is given, inside
// {V_next <= 1}; returns V / c. Throws CertificationError below c_min.
Containment local_containment(const PolySystem& sys, const Polynomial& V, const Polynomial& p, double beta,
                              const std::optional<Polynomial>& V_next, const CertifyOptions& options = {});

// Expanding interior with V re-centering and shape replacement. V_seed must
// have {V_seed <= 1} invariant.
Expansion expand_interior(const PolySystem& sys, const Polynomial& V_seed, const Polynomial& p,
                          const std::optional<Polynomial>& V_next, const CertifyOptions& options = {});

// Largest beta with {p <= beta} inside {V <= 1}; 0 if none is found.
double inscribed_level(const PolySystem& sys, const Polynomial& V, const Polynomial& p,
                       const CertifyOptions& options = {});

// Nonzero chart points of the star-shaped part of {V <= 1} around the origin,
// drawn along random rays in the sampling parameters.
std::vector<Eigen::VectorXd> sample_sublevel(const PolySystem& sys, const Polynomial& V, int count,
                                             std::mt19937_64& rng, const CertifyOptions& options = {});

SampleCheck check_certificate(const PolySystem& sys, const Polynomial& V,
                              const std::optional<Polynomial>& V_next, int count, std::uint64_t seed,
                              const CertifyOptions& options = {});

struct StageDiagnostics {
  int initial_solves = 0;
  int containment_solves = 0;
  int expand_inner = 0;
  int expand_outer = 0;
  double beta_initial = 0.0;
  double c = 0.0;
  double beta_expand = 0.0;
  double max_residual = 0.0;
  SampleCheck check;
  std::string note;
};

struct LyapunovCertificate {
  int state_id = 0;
  int num_units = 0;
  Eigen::VectorXd sep;
  Polynomial V;  // chart of state_id, unit level
  // Largest beta with {p0 <= beta} inside {V <= 1} for the initial shape p0.
  double beta_achieved = 0.0;
  int successor = 0;  // state id, 0 for the last state
  StageDiagnostics diagnostics;
};

// One stage model per switching state.
struct StageModel {
  psys::ReducedSystem system;  // sep filled in
  psys::RecastSystem recast;
};

std::map<int, StageModel> build_stage_models(const psys::NetworkModel& net);

struct ChainCertificate {
  std::string name;  // trip order
  int num_units = 0;
  std::vector<int> state_ids;  // sigma_1 .. sigma_N
  bool certified = false;
  int failing_state = 0;
  std::string reason;
  // Ordered sigma_N first; back() is the innermost set.
  std::vector<LyapunovCertificate> stages;
  const LyapunovCertificate& innermost() const { return stages.back(); }
};

// Stage results depend only on the remaining chain, so sequences sharing a
// suffix share work. Safe for concurrent use.
class StageCache {
 public:
  std::optional<LyapunovCertificate> find(const std::vector<int>& suffix, std::string* failure) const;
  void store(const std::vector<int>& suffix, const LyapunovCertificate& cert);
  void store_failure(const std::vector<int>& suffix, const std::string& reason);

 private:
  mutable std::mutex mutex_;
  std::map<std::vector<int>, LyapunovCertificate> done_;
  std::map<std::vector<int>, std::string> failed_;
};

LyapunovCertificate certify_stage(const StageModel& model, int state_id, int num_units,
                                  const LyapunovCertificate* successor, const StageModel* successor_model,
                                  const CertifyOptions& options = {});

ChainCertificate certify_sequence(const cascade::CascadeSequence& seq, const std::map<int, StageModel>& models,
                                  const CertifyOptions& options = {}, StageCache* cache = nullptr);

using ChainSet = std::map<cascade::TripOrder, ChainCertificate>;

// Certifies every sequence with up to `jobs` worker threads sharing one
// stage cache. The result does not depend on jobs.
ChainSet certify_all(const std::vector<cascade::CascadeSequence>& sequences, const std::map<int, StageModel>& models,
                     const CertifyOptions& options = {}, int jobs = 1);

// Innermost V evaluated at a physical state (delta, omega).
double innermost_level(const ChainCertificate& chain, const Eigen::VectorXd& state);

// Text form, one block per stage in sigma_N-first order:
//   certificate_chain <name>
//   units <n>
//   states <id_1> ... <id_N>
//   status certified | uncertifiable <failing state> <reason>
//   stage <id> successor <id or 0>
//   sep <values>
//   V <canonical polynomial>
//   beta <value>
//   diagnostics <key>=<value> ...
//   end
void write_chain(std::ostream& out, const ChainCertificate& chain);
ChainCertificate read_chain(std::istream& in);

}  // namespace csos::certify
