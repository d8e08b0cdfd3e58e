#include "csos/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace csos::cascade {

namespace {

void permute_subsets(int n, int length, TripOrder& cur, std::vector<bool>& used,
                     std::vector<TripOrder>& out) {
  if (static_cast<int>(cur.size()) == length) {
    out.push_back(cur);
    return;
  }
  for (int u = 1; u <= n; ++u) {
    if (used[u]) continue;
    used[u] = true;
    cur.push_back(u);
    permute_subsets(n, length, cur, used, out);
    cur.pop_back();
    used[u] = false;
  }
}

class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      c_ += (sum_ - t) + v;
    } else {
      c_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

}  // namespace

std::vector<int> CascadeSequence::state_ids() const {
  std::vector<int> ids;
  for (const auto& s : states) ids.push_back(s.id());
  return ids;
}

std::string CascadeSequence::name() const { return trip_order_name(trip_order); }

std::string trip_order_name(const TripOrder& order) {
  if (order.empty()) return "none";
  std::string s;
  for (size_t k = 0; k < order.size(); ++k) s += (k ? "-" : "") + std::to_string(order[k]);
  return s;
}

CascadeSequence make_sequence(int num_units, const TripOrder& trip_order) {
  CascadeSequence seq;
  seq.num_units = num_units;
  seq.trip_order = trip_order;
  seq.states.push_back(SwitchingState::all_online(num_units));
  std::set<int> seen;
  for (int u : trip_order) {
    if (u < 1 || u > num_units) {
      throw std::invalid_argument("trip order " + trip_order_name(trip_order) + ": unit " +
                                  std::to_string(u) + " out of range");
    }
    if (!seen.insert(u).second) {
      throw std::invalid_argument("trip order " + trip_order_name(trip_order) + " repeats unit " +
                                  std::to_string(u));
    }
    seq.states.push_back(seq.states.back().trip(u));
  }
  return seq;
}

long long sequence_count(int num_units) {
  long long total = 0;
  long long term = 1;  // n! / (n - r)!
  for (int r = 0; r <= num_units; ++r) {
    total += term;
    term *= num_units - r;
  }
  return total;
}

std::vector<CascadeSequence> enumerate_sequences(int num_units) {
  if (num_units < 0) throw std::invalid_argument("enumerate_sequences: negative unit count");
  std::vector<CascadeSequence> out;
  for (int r = 0; r <= num_units; ++r) {
    std::vector<TripOrder> orders;
    TripOrder cur;
    std::vector<bool> used(num_units + 1, false);
    permute_subsets(num_units, r, cur, used, orders);
    for (const auto& o : orders) out.push_back(make_sequence(num_units, o));
  }
  return out;
}

CascadeSequence apply_blocking(const CascadeSequence& seq, const BlockingLogic& blocking) {
  std::vector<bool> online(seq.num_units + 1, true);
  TripOrder kept;
  for (int u : seq.trip_order) {
    bool blocked = false;
    for (const auto& group : blocking.groups) {
      if (std::find(group.begin(), group.end(), u) == group.end()) continue;
      int others_online = 0;
      for (int v : group) others_online += (v != u && v >= 1 && v <= seq.num_units && online[v]);
      if (others_online == 0) blocked = true;
    }
    if (blocked) continue;
    online[u] = false;
    kept.push_back(u);
  }
  return make_sequence(seq.num_units, kept);
}

Distribution uniform_distribution(int num_units) {
  const auto seqs = enumerate_sequences(num_units);
  Distribution d;
  for (const auto& s : seqs) d[s.trip_order] = 1.0 / static_cast<double>(seqs.size());
  return d;
}

double total_probability(const Distribution& dist) {
  CompensatedSum s;
  for (const auto& [order, p] : dist) s.add(p);
  return s.value();
}

void validate_distribution(const Distribution& dist, double tolerance) {
  for (const auto& [order, p] : dist) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("probability of " + trip_order_name(order) + " outside [0, 1]");
    }
  }
  const double total = total_probability(dist);
  if (std::abs(total - 1.0) > tolerance) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", total);
    throw std::invalid_argument(std::string("probabilities sum to ") + buf);
  }
}

Distribution reassign_probabilities(const Distribution& dist, int num_units,
                                    const BlockingLogic& blocking) {
  validate_distribution(dist);
  std::map<TripOrder, CompensatedSum> acc;
  for (const auto& [order, p] : dist) {
    acc[order];  // every source stays listed, possibly with zero mass
    const auto image = apply_blocking(make_sequence(num_units, order), blocking);
    acc[image.trip_order].add(p);
  }
  Distribution out;
  for (const auto& [order, s] : acc) out[order] = s.value();
  return out;
}

Distribution read_distribution(std::istream& in, int num_units) {
  Distribution d;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("probability file line " + std::to_string(lineno) + ": missing ':'");
    }
    std::string lhs = line.substr(0, colon);
    std::replace_if(lhs.begin(), lhs.end(), [](char c) { return c == ',' || c == '-'; }, ' ');
    std::istringstream ls(lhs);
    TripOrder order;
    std::string tok;
    while (ls >> tok) {
      if (tok == "none") continue;
      try {
        order.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw std::invalid_argument("probability file line " + std::to_string(lineno) +
                                    ": bad unit '" + tok + "'");
      }
    }
    make_sequence(num_units, order);
    double p = 0.0;
    try {
      p = std::stod(line.substr(colon + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("probability file line " + std::to_string(lineno) + ": bad probability");
    }
    if (!d.emplace(order, p).second) {
      throw std::invalid_argument("probability file line " + std::to_string(lineno) +
                                  ": duplicate sequence " + trip_order_name(order));
    }
  }
  validate_distribution(d, 1e-9);
  return d;
}

void write_distribution(std::ostream& out, const Distribution& dist) {
  char buf[64];
  for (const auto& [order, p] : dist) {
    std::snprintf(buf, sizeof(buf), "%.17g", p);
    out << trip_order_name(order) << " : " << buf << "\n";
  }
}

}  // namespace csos::cascade
