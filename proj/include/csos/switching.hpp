#pragma once

// Online/offline status of the renewable units. Ids follow the status-string
// convention with unit 1 as the leftmost (most significant) character and
// "all online" as id 1:  id = 2^n - value(status bits).

#include <string>
#include <vector>

namespace csos {

class SwitchingState {
 public:
  SwitchingState() = default;
  explicit SwitchingState(std::vector<bool> online) : online_(std::move(online)) {}
  static SwitchingState all_online(int n) { return SwitchingState(std::vector<bool>(n, true)); }
  // Throws std::invalid_argument for id outside 1..2^n.
  static SwitchingState from_id(int id, int n);

  int size() const { return static_cast<int>(online_.size()); }
  // Unit index is 1-based.
  bool online(int unit) const { return online_.at(unit - 1); }
  const std::vector<bool>& bits() const { return online_; }
  int num_online() const;
  int id() const;
  // "110" style, unit 1 first.
  std::string status_string() const;
  // Throws std::logic_error if the unit is already offline.
  SwitchingState trip(int unit) const;

  bool operator==(const SwitchingState&) const = default;

 private:
  std::vector<bool> online_;
};

}  // namespace csos
