#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fingers/multi_finger_map.hpp"
#include "fingers/ops.hpp"
#include "fingers/types.hpp"

namespace fingers {

// Sequential reference map plus the finger-bound accumulator. Fed a trace in
// linearization order, it produces each operation's reference result and its
// finger distance r (items from the accessed key to the nearest finger,
// inclusive), and accumulates F = sum(log2(r) + 1). Fingers are the two ends
// plus any movable fingers. Strictly sequential; run post-hoc on recorded
// traces.
//
// Distances come from a Fenwick tree over the trace's key universe, so the
// universe must be pre-declared (every key the trace touches); results come
// from an independent std::map.
class FingerOracle {
 public:
  struct Applied {
    OpResult result;
    std::uint64_t r = 1;
    double charge = 0;  // log2(r) + 1
  };

  // `finger_keys` places the movable fingers just before each (ascending)
  // key, matching the multi-finger structure's constructor.
  explicit FingerOracle(std::vector<Key> universe, std::vector<Key> finger_keys = {});

  // Applies the next operation of the trace. The finger distance is charged
  // against the pre-operation state: a present key's r counts items from it
  // to the nearest finger; an absent key uses its insertion rank; a finger
  // move charges the number of items the finger passed over (at least 1).
  Applied apply(const Operation& op);

  double f_total() const { return f_total_; }
  std::uint64_t items() const { return present_; }
  const std::map<Key, Value>& reference() const { return map_; }
  FingerPos finger(int index) const {
    return fingers_.at(static_cast<std::size_t>(index));
  }

 private:
  std::uint64_t fenwick_prefix(std::size_t count) const;  // sum of first `count` slots
  void fenwick_add(std::size_t idx, std::int64_t delta);
  std::uint64_t rank_lt(Key k) const;
  std::uint64_t rank_le(Key k) const;
  std::uint64_t left_count(const FingerPos& p) const;
  std::uint64_t distance(Key k) const;

  std::vector<Key> keys_;            // sorted unique universe
  std::vector<std::uint64_t> fen_;   // Fenwick over present flags
  std::uint64_t present_ = 0;
  std::map<Key, Value> map_;
  std::vector<FingerPos> fingers_;
  double f_total_ = 0;
};

// Exact replay check: feeds the linearization through a fresh oracle and
// compares every recorded result. `finger_keys` must match the structure
// that produced the trace (empty for the single-finger-pair variants).
struct VerifyResult {
  bool ok = true;
  std::uint64_t checked = 0;
  std::uint64_t first_mismatch_op_id = 0;
  std::string detail;
  double f_total = 0;
};

VerifyResult verify_linearization(const std::vector<LinRecord>& lin,
                                  std::vector<Key> finger_keys = {});

}  // namespace fingers
