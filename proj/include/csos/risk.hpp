#pragma once

// Risk of instability: the probability-weighted share of cascade sequences
// whose innermost certified set misses a starting state, evaluated pointwise
// and on an angle grid, plus blocking-logic comparisons.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csos/cascade.hpp"
#include "csos/certify.hpp"

namespace csos::risk {

// Sum p_i [V_inner^(i)(x0) > 1]; an uncertifiable sequence counts as 1
// everywhere. Throws std::invalid_argument when the probabilities do not
// sum to 1 within 1e-9 or a sequence has no chain.
double risk_at(const Eigen::VectorXd& x0, const certify::ChainSet& chains, const cascade::Distribution& dist);

// Grid over the first two relative angles (absolute values, rad). The other
// angles are taken from base_angles and the speeds from `speeds`; both
// default to zero. With a single relative angle the second axis has one
// point and is ignored.
struct GridSpec {
  double lo1 = -M_PI, hi1 = M_PI;
  double lo2 = -M_PI, hi2 = M_PI;
  int n1 = 101, n2 = 101;
  Eigen::VectorXd base_angles;
  Eigen::VectorXd speeds;

  std::vector<double> axis1() const;
  std::vector<double> axis2() const;
  // Physical state (delta, omega) of cell (i, j) for m relative angles.
  Eigen::VectorXd state(int i, int j, int m) const;
};

struct RiskGrid {
  GridSpec spec;
  int machines = 0;  // relative angles m
  Eigen::MatrixXd values;  // n1 x n2
  // Sequences, probabilities and blocking logic behind the values, plus
  // anything the caller adds (config hash, seed, version).
  std::map<std::string, std::string> metadata;

  int zero_cells() const;
  double zero_fraction() const;
};

RiskGrid risk_grid(const certify::ChainSet& chains, const cascade::Distribution& dist, const GridSpec& spec,
                   int machines, int jobs = 1);

// First line "delta_1\delta_2" then the axis-2 values; each following row
// is an axis-1 value and its n2 risks. Values use %.17g.
void write_grid_csv(std::ostream& out, const RiskGrid& grid);
// JSON sidecar with the grid spec and metadata.
void write_grid_metadata(std::ostream& out, const RiskGrid& grid);
// Restores spec, machines and metadata; values are left empty.
RiskGrid read_grid_metadata(std::istream& in);

struct BlockingOutcome {
  cascade::BlockingLogic blocking;
  cascade::Distribution distribution;  // after reassignment
  RiskGrid grid;
};

// One grid per option, ranked by zero-risk area (larger first), then by
// option name. Every blocked image must have a chain in `chains`.
std::vector<BlockingOutcome> compare_blocking(const certify::ChainSet& chains, const cascade::Distribution& base,
                                              int num_units, const std::vector<cascade::BlockingLogic>& options,
                                              const GridSpec& spec, int machines, int jobs = 1);

}  // namespace csos::risk
