#include "csos/switching.hpp"

#include <stdexcept>

namespace csos {

SwitchingState SwitchingState::from_id(int id, int n) {
  if (n < 0 || n > 30) throw std::invalid_argument("switching state: unsupported unit count");
  const int total = 1 << n;
  if (id < 1 || id > total) {
    throw std::invalid_argument("switching state id " + std::to_string(id) + " outside 1.." +
                                std::to_string(total));
  }
  const int value = total - id;
  std::vector<bool> bits(n);
  for (int k = 0; k < n; ++k) bits[k] = (value >> (n - 1 - k)) & 1;
  return SwitchingState(std::move(bits));
}

int SwitchingState::num_online() const {
  int c = 0;
  for (bool b : online_) c += b;
  return c;
}

int SwitchingState::id() const {
  const int n = size();
  int value = 0;
  for (int k = 0; k < n; ++k) value = 2 * value + (online_[k] ? 1 : 0);
  return (1 << n) - value;
}

std::string SwitchingState::status_string() const {
  std::string s;
  for (bool b : online_) s += b ? '1' : '0';
  return s;
}

SwitchingState SwitchingState::trip(int unit) const {
  if (unit < 1 || unit > size()) throw std::invalid_argument("trip: unit out of range");
  if (!online_[unit - 1]) {
    throw std::logic_error("unit " + std::to_string(unit) + " already offline");
  }
  SwitchingState next = *this;
  next.online_[unit - 1] = false;
  return next;
}

}  // namespace csos
