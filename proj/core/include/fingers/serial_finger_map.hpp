#pragma once

#include <string>
#include <vector>

#include "fingers/ledger.hpp"
#include "fingers/ops.hpp"
#include "fingers/segment.hpp"
#include "fingers/types.hpp"

namespace fingers {

// Sequential finger structure: one operation at a time, searched from both
// ends through the segment chains, followed by cascade and chain
// rebalancing. Serves as the correctness and cost baseline for the batched
// variants.
class SerialFingerMap {
 public:
  explicit SerialFingerMap(CostLedger* ledger = nullptr) : ledger_(ledger) {}

  OpResult execute(const Operation& op);

  // Restores balance at (side, level) and cascades upward; no-op when the
  // segment is already balanced.
  void rebalance_segment(int side, int level);
  // Single-shot chain-length equalization; no-op on equal chains.
  void rebalance_chains();

  const SegmentedMap& store() const { return store_; }
  std::uint64_t size() const { return store_.total_size(); }
  std::vector<std::pair<Key, Value>> contents() const { return store_.contents(); }
  std::vector<std::string> check_invariants() const { return store_.check_invariants(true); }
  const std::vector<LinRecord>& linearization() const { return lin_; }

 private:
  SegmentedMap store_;
  CostLedger* ledger_;
  std::vector<LinRecord> lin_;
};

}  // namespace fingers
