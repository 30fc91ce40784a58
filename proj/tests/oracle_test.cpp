#include "fingers/oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <vector>

namespace fingers {
namespace {

Operation mk(OpType t, Key k, Value v = 0, std::uint64_t id = 0) {
  return Operation{t, k, v, id, 0, true};
}

std::vector<Key> iota_keys(Key n) {
  std::vector<Key> keys(static_cast<std::size_t>(n));
  std::iota(keys.begin(), keys.end(), Key{1});
  return keys;
}

TEST(FingerOracle, AppendingInsertsAndEndSearchesCostOne) {
  FingerOracle oracle(iota_keys(100));
  // Each ascending insert lands right at the high end: distance 1.
  for (Key k = 1; k <= 100; ++k) {
    auto a = oracle.apply(mk(OpType::kInsert, k, k));
    EXPECT_FALSE(a.result.found);
    EXPECT_EQ(a.r, 1u) << "insert " << k;
    EXPECT_DOUBLE_EQ(a.charge, 1.0);
  }
  auto lo = oracle.apply(mk(OpType::kSearch, 1));
  EXPECT_TRUE(lo.result.found);
  EXPECT_EQ(lo.r, 1u);
  EXPECT_DOUBLE_EQ(lo.charge, 1.0);
  auto hi = oracle.apply(mk(OpType::kSearch, 100));
  EXPECT_EQ(hi.r, 1u);
  EXPECT_DOUBLE_EQ(oracle.f_total(), 102.0);  // 100 inserts + 2 searches, all r=1
}

TEST(FingerOracle, MedianOfFifteenCostsFour) {
  FingerOracle oracle(iota_keys(15));
  for (Key k = 1; k <= 15; ++k) oracle.apply(mk(OpType::kInsert, k, k));
  auto a = oracle.apply(mk(OpType::kSearch, 8));
  EXPECT_TRUE(a.result.found);
  EXPECT_EQ(a.r, 8u);  // eight items to either end, inclusive
  EXPECT_DOUBLE_EQ(a.charge, 4.0);
}

TEST(FingerOracle, AbsentKeyUsesInsertionRank) {
  FingerOracle oracle({10, 15, 20, 30});
  for (Key k : {10, 20, 30}) oracle.apply(mk(OpType::kInsert, k, k));
  auto a = oracle.apply(mk(OpType::kSearch, 15));
  EXPECT_FALSE(a.result.found);
  // 15 would slot after one item from the left, before two from the right.
  EXPECT_EQ(a.r, 2u);
  EXPECT_DOUBLE_EQ(a.charge, 2.0);
}

TEST(FingerOracle, MovableFingerShortensDistances) {
  FingerOracle oracle(iota_keys(10), {5});
  for (Key k = 1; k <= 10; ++k) oracle.apply(mk(OpType::kInsert, k, k));
  // Key 7 sits three items from the finger before 5 (5, 6, 7), four from the
  // right end; the finger wins.
  auto a = oracle.apply(mk(OpType::kSearch, 7));
  EXPECT_EQ(a.r, 3u);
  EXPECT_DOUBLE_EQ(a.charge, std::log2(3.0) + 1.0);
  // Key 4 is adjacent on the finger's left.
  auto b = oracle.apply(mk(OpType::kSearch, 4));
  EXPECT_EQ(b.r, 1u);
}

TEST(FingerOracle, FingerMoveChargesItemsPassed) {
  FingerOracle oracle(iota_keys(10), {5});
  for (Key k = 1; k <= 10; ++k) oracle.apply(mk(OpType::kInsert, k, k));
  Operation move;
  move.type = OpType::kFingerMove;
  move.key = 9;
  move.finger = 0;
  move.before = true;
  auto a = oracle.apply(move);
  EXPECT_TRUE(a.result.found);
  EXPECT_FALSE(a.result.rejected);
  EXPECT_EQ(a.r, 4u);  // items 5, 6, 7, 8 passed
  EXPECT_DOUBLE_EQ(a.charge, 3.0);
  EXPECT_EQ(oracle.finger(0), (FingerPos{9, true}));
  // Moving back where it stands costs the minimum charge.
  move.key = 9;
  auto b = oracle.apply(move);
  EXPECT_EQ(b.r, 1u);
  EXPECT_DOUBLE_EQ(b.charge, 1.0);
}

TEST(FingerOracle, CrossingMovesAreRejected) {
  FingerOracle oracle(iota_keys(10), {3, 7});
  for (Key k = 1; k <= 10; ++k) oracle.apply(mk(OpType::kInsert, k, k));
  Operation move;
  move.type = OpType::kFingerMove;
  move.key = 9;
  move.finger = 0;  // finger 0 may not pass finger 1 at 7
  move.before = true;
  auto a = oracle.apply(move);
  EXPECT_TRUE(a.result.rejected);
  EXPECT_EQ(oracle.finger(0), (FingerPos{3, true}));
}

TEST(FingerOracle, DeterministicAcrossRuns) {
  auto run = [] {
    FingerOracle oracle(iota_keys(50), {25});
    double f = 0;
    for (Key k = 1; k <= 50; ++k) f += oracle.apply(mk(OpType::kInsert, k, k * 2)).charge;
    for (Key k = 50; k >= 1; --k) f += oracle.apply(mk(OpType::kSearch, k)).charge;
    return std::pair{f, oracle.f_total()};
  };
  auto [f1, t1] = run();
  auto [f2, t2] = run();
  EXPECT_DOUBLE_EQ(f1, f2);
  EXPECT_DOUBLE_EQ(t1, t2);
  EXPECT_DOUBLE_EQ(f1, t1);
}

TEST(FingerOracle, RejectsBadFingerKeys) {
  EXPECT_THROW(FingerOracle({1, 2, 3}, {5, 4}), std::invalid_argument);
  EXPECT_THROW(FingerOracle({1, 2, 3}, {4, 4}), std::invalid_argument);
  // The universe itself may arrive unsorted; the oracle normalizes it.
  FingerOracle ok({3, 1, 2, 2}, {2});
  EXPECT_NO_THROW(ok.apply(mk(OpType::kInsert, 3, 3)));
}

TEST(FingerOracle, RejectsKeyOutsideUniverse) {
  FingerOracle oracle({1, 2, 3});
  EXPECT_THROW(oracle.apply(mk(OpType::kInsert, 9, 9)), std::invalid_argument);
}

TEST(VerifyLinearization, AcceptsAFaithfulTraceAndCountsIt) {
  std::vector<LinRecord> lin;
  std::map<Key, Value> model;
  std::mt19937_64 rng(6);
  for (std::uint64_t i = 0; i < 3000; ++i) {
    OpType t = static_cast<OpType>(rng() % 4);
    Key k = static_cast<Key>(rng() % 200);
    Value v = static_cast<Value>(rng() % 1000);
    auto it = model.find(k);
    OpResult res{it != model.end(), it != model.end() ? it->second : 0, false};
    switch (t) {
      case OpType::kUpdate:
        if (it != model.end()) it->second = v;
        break;
      case OpType::kInsert:
        model[k] = v;
        break;
      case OpType::kDelete:
        if (it != model.end()) model.erase(it);
        break;
      default:
        break;
    }
    lin.push_back({i, t, k, v, res});
  }
  auto verdict = verify_linearization(lin);
  EXPECT_TRUE(verdict.ok) << verdict.detail;
  EXPECT_EQ(verdict.checked, lin.size());
  EXPECT_GT(verdict.f_total, 0.0);
}

TEST(VerifyLinearization, CatchesADoctoredRecord) {
  std::vector<LinRecord> lin;
  lin.push_back({0, OpType::kInsert, 5, 50, OpResult{false, 0, false}});
  lin.push_back({1, OpType::kSearch, 5, 0, OpResult{true, 50, false}});
  lin.push_back({2, OpType::kSearch, 5, 0, OpResult{true, 51, false}});  // wrong value
  auto verdict = verify_linearization(lin);
  EXPECT_FALSE(verdict.ok);
  EXPECT_EQ(verdict.first_mismatch_op_id, 2u);
  EXPECT_FALSE(verdict.detail.empty());

  lin[2].result.value = 50;
  EXPECT_TRUE(verify_linearization(lin).ok);

  // A flipped found bit is also caught.
  lin[1].result.found = false;
  auto v2 = verify_linearization(lin);
  EXPECT_FALSE(v2.ok);
  EXPECT_EQ(v2.first_mismatch_op_id, 1u);
}

TEST(VerifyLinearization, ChecksMoveLegalityInReplay) {
  // Finger 0 moving from before-2 to before-9 would cross finger 1 at 5.
  // Recording that move as rejected replays cleanly; recording it as
  // accepted is a mismatch the replay must flag.
  std::vector<LinRecord> lin;
  lin.push_back({0, OpType::kInsert, 10, 1, OpResult{false, 0, false}});
  LinRecord move{1, OpType::kFingerMove, 9, 0, OpResult{false, 0, true}};
  move.value = 0;  // finger index rides in the value slot
  move.before = true;
  lin.push_back(move);
  EXPECT_TRUE(verify_linearization(lin, {2, 5}).ok) << "honest rejection flagged";

  lin[1].result = OpResult{true, 0, false};  // forged acceptance
  auto verdict = verify_linearization(lin, {2, 5});
  EXPECT_FALSE(verdict.ok);
  EXPECT_EQ(verdict.first_mismatch_op_id, 1u);
}

}  // namespace
}  // namespace fingers
