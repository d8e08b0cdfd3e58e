#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "csos/cascade.hpp"

namespace csos::cascade {
namespace {

struct TableRow {
  TripOrder order;
  std::vector<int> chain;
};

// Expected chains for three units, one row per switching signal 1..16.
const std::vector<TableRow> kThreeUnitTable = {
    {{}, {1}},
    {{1}, {1, 5}},
    {{2}, {1, 3}},
    {{3}, {1, 2}},
    {{2, 1}, {1, 3, 7}},
    {{1, 2}, {1, 5, 7}},
    {{3, 1}, {1, 2, 6}},
    {{1, 3}, {1, 5, 6}},
    {{3, 2}, {1, 2, 4}},
    {{2, 3}, {1, 3, 4}},
    {{3, 2, 1}, {1, 2, 4, 8}},
    {{3, 1, 2}, {1, 2, 6, 8}},
    {{2, 3, 1}, {1, 3, 4, 8}},
    {{2, 1, 3}, {1, 3, 7, 8}},
    {{1, 2, 3}, {1, 5, 7, 8}},
    {{1, 3, 2}, {1, 5, 6, 8}},
};

long long formula(int n) {
  long long total = 0;
  for (int r = 0; r <= n; ++r) {
    long long c = 1;
    for (int k = 0; k < r; ++k) c = c * (n - k) / (k + 1);
    long long f = 1;
    for (int k = 2; k <= r; ++k) f *= k;
    total += c * f;
  }
  return total;
}

TEST(SwitchingStateTest, StatusEncoding) {
  EXPECT_EQ(SwitchingState::from_id(1, 3).status_string(), "111");
  EXPECT_EQ(SwitchingState::from_id(2, 3).status_string(), "110");
  EXPECT_EQ(SwitchingState::from_id(5, 3).status_string(), "011");
  EXPECT_EQ(SwitchingState::from_id(8, 3).status_string(), "000");
  for (int id = 1; id <= 16; ++id) EXPECT_EQ(SwitchingState::from_id(id, 4).id(), id);
  EXPECT_THROW(SwitchingState::from_id(9, 3), std::invalid_argument);
}

TEST(EnumerateTest, ThreeUnitsMatchTable) {
  const auto seqs = enumerate_sequences(3);
  ASSERT_EQ(seqs.size(), 16u);
  std::set<std::pair<TripOrder, std::vector<int>>> got, want;
  for (const auto& s : seqs) got.insert({s.trip_order, s.state_ids()});
  for (const auto& r : kThreeUnitTable) want.insert({r.order, r.chain});
  EXPECT_EQ(got, want);
  EXPECT_EQ(make_sequence(3, {1, 3, 2}).state_ids(), (std::vector<int>{1, 5, 6, 8}));
}

TEST(EnumerateTest, CountsMatchFormula) {
  for (int n = 0; n <= 5; ++n) {
    EXPECT_EQ(static_cast<long long>(enumerate_sequences(n).size()), formula(n)) << n;
    EXPECT_EQ(sequence_count(n), formula(n));
  }
  EXPECT_EQ(enumerate_sequences(1).size(), 2u);
  EXPECT_EQ(enumerate_sequences(2).size(), 5u);
}

TEST(EnumerateTest, ChainsTripOneUnitPerStep) {
  for (const auto& s : enumerate_sequences(4)) {
    EXPECT_EQ(s.states.front(), SwitchingState::all_online(4));
    for (size_t k = 1; k < s.states.size(); ++k) {
      int changed = 0;
      for (int u = 1; u <= 4; ++u) {
        EXPECT_FALSE(!s.states[k - 1].online(u) && s.states[k].online(u));  // no return
        changed += s.states[k - 1].online(u) != s.states[k].online(u);
      }
      EXPECT_EQ(changed, 1);
    }
  }
}

TEST(EnumerateTest, InvalidOrdersRejected) {
  EXPECT_THROW(make_sequence(3, {1, 1}), std::invalid_argument);
  EXPECT_THROW(make_sequence(3, {4}), std::invalid_argument);
}

TEST(BlockingTest, WorkedExample) {
  const BlockingLogic b{"b12", {{1, 2}}};
  EXPECT_EQ(apply_blocking(make_sequence(3, {1, 2, 3}), b).trip_order, (TripOrder{1, 3}));
  EXPECT_EQ(apply_blocking(make_sequence(3, {2, 1, 3}), b).trip_order, (TripOrder{2, 3}));
}

TEST(BlockingTest, EmptyIsIdentity) {
  for (const auto& s : enumerate_sequences(3)) {
    EXPECT_EQ(apply_blocking(s, BlockingLogic{}).trip_order, s.trip_order);
  }
}

TEST(BlockingTest, SequentialSemanticsForThreeMemberGroup) {
  const BlockingLogic b{"b123", {{1, 2, 3}}};
  EXPECT_EQ(apply_blocking(make_sequence(3, {3, 2, 1}), b).trip_order, (TripOrder{3, 2}));
}

TEST(BlockingTest, SingleUnitGroupNeverTrips) {
  const BlockingLogic b{"b3", {{3}}};
  EXPECT_EQ(apply_blocking(make_sequence(3, {3, 1, 2}), b).trip_order, (TripOrder{1, 2}));
}

TEST(BlockingTest, Idempotent) {
  const std::vector<BlockingLogic> options = {{"a", {{1, 2}}}, {"b", {{1, 2, 3}}}, {"c", {{2, 3}, {1}}}};
  for (const auto& b : options) {
    for (const auto& s : enumerate_sequences(3)) {
      const auto once = apply_blocking(s, b);
      EXPECT_EQ(apply_blocking(once, b).trip_order, once.trip_order);
    }
  }
}

TEST(ProbabilityTest, UniformConservedUnderBlocking) {
  const auto base = uniform_distribution(3);
  const auto out = reassign_probabilities(base, 3, {"b12", {{1, 2}}});
  EXPECT_NEAR(total_probability(out), 1.0, 1e-12);
  EXPECT_EQ(out.at({1, 2, 3}), 0.0);
  // Unchanged sequences keep their mass.
  EXPECT_EQ(out.at({3}), 1.0 / 16.0);
}

TEST(ProbabilityTest, TwoSourcesIntoOneTarget) {
  Distribution d = {{{}, 13.0 / 16.0}, {{1}, 1.0 / 16.0}, {{2}, 1.0 / 16.0}, {{3}, 1.0 / 16.0}};
  // Single-unit groups block units 1 and 2 outright.
  const auto out = reassign_probabilities(d, 3, {"b", {{1}, {2}}});
  EXPECT_NEAR(out.at({}), 15.0 / 16.0, 1e-15);
  EXPECT_EQ(out.at({1}), 0.0);
  EXPECT_EQ(out.at({3}), 1.0 / 16.0);
}

TEST(ProbabilityTest, AssumptionArithmetic) {
  // Under {1,2}: 1-2 -> 1, while 1-2-3 and 1-3-2 both -> 1-3.
  Distribution d = uniform_distribution(3);
  const auto out = reassign_probabilities(d, 3, {"b12", {{1, 2}}});
  EXPECT_NEAR(out.at({1}), 2.0 / 16.0, 1e-15);
  EXPECT_NEAR(out.at({1, 3}), 3.0 / 16.0, 1e-15);
}

TEST(ProbabilityTest, Validation) {
  Distribution bad = {{{}, 1.5}};
  EXPECT_THROW(validate_distribution(bad), std::invalid_argument);
  Distribution short_total = {{{}, 0.5}};
  EXPECT_THROW(validate_distribution(short_total), std::invalid_argument);
}

TEST(ProbabilityTest, FileRoundTrip) {
  std::istringstream in("# comment\nnone : 0.5\n1-3-2 : 0.25\n2, 1 : 0.25\n");
  const auto d = read_distribution(in, 3);
  EXPECT_EQ(d.at({}), 0.5);
  EXPECT_EQ(d.at({1, 3, 2}), 0.25);
  EXPECT_EQ(d.at({2, 1}), 0.25);
  std::stringstream ss;
  write_distribution(ss, d);
  EXPECT_EQ(read_distribution(ss, 3), d);
  std::istringstream dup("1 : 0.5\n1 : 0.5\n");
  EXPECT_THROW(read_distribution(dup, 3), std::invalid_argument);
}

}  // namespace
}  // namespace csos::cascade
