#pragma once

// Cascade sequences: ordered trips of renewable units (no unit returns), the
// switching-state chains they induce, blocking rules and sequence
// probabilities.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "csos/switching.hpp"

namespace csos::cascade {

using TripOrder = std::vector<int>;  // 1-based unit ids

struct CascadeSequence {
  int num_units = 0;
  TripOrder trip_order;
  // states[0] is all online; states[k] follows the k-th trip.
  std::vector<SwitchingState> states;

  std::vector<int> state_ids() const;
  // "1-3-2", or "none" for the empty order.
  std::string name() const;
};

// Throws std::invalid_argument on repeated or out-of-range units.
CascadeSequence make_sequence(int num_units, const TripOrder& trip_order);

// Sum over r of C(n, r) r!.
long long sequence_count(int num_units);

// Ordered by number of trips, then lexicographically by trip order.
std::vector<CascadeSequence> enumerate_sequences(int num_units);

// Each group's last member still online never trips. A single-unit group
// blocks that unit outright. Rules are checked against the online set at
// the time of each trip.
struct BlockingLogic {
  std::string name;
  std::vector<std::vector<int>> groups;
  bool empty() const { return groups.empty(); }
};

CascadeSequence apply_blocking(const CascadeSequence& seq, const BlockingLogic& blocking);

using Distribution = std::map<TripOrder, double>;

Distribution uniform_distribution(int num_units);
// Throws std::invalid_argument when an entry is outside [0, 1] or the total
// differs from 1 by more than tolerance.
void validate_distribution(const Distribution& dist, double tolerance = 1e-12);
// Mass of each sequence moves to its blocked image.
Distribution reassign_probabilities(const Distribution& dist, int num_units,
                                    const BlockingLogic& blocking);
// Neumaier-compensated total.
double total_probability(const Distribution& dist);

// Lines "<trip order> : <probability>"; trip order as unit ids separated by
// spaces, commas or dashes, or "none". '#' starts a comment.
Distribution read_distribution(std::istream& in, int num_units);
void write_distribution(std::ostream& out, const Distribution& dist);

std::string trip_order_name(const TripOrder& order);

}  // namespace csos::cascade
