#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "fingers/batch_finger_map.hpp"
#include "fingers/ledger.hpp"
#include "fingers/ops.hpp"
#include "fingers/segment.hpp"
#include "fingers/sync.hpp"
#include "fingers/types.hpp"

namespace fingers {

// Position of a movable finger: a key plus which side of that key the finger
// sits on. `before == true` places the finger just before `key`, so the key
// itself belongs to the sector on the finger's right.
struct FingerPos {
  Key key = std::numeric_limits<Key>::min();
  bool before = true;

  bool operator==(const FingerPos&) const = default;
};

inline bool pos_less(const FingerPos& a, const FingerPos& b) {
  if (a.key != b.key) return a.key < b.key;
  return a.before && !b.before;
}

// Item with key k lies strictly right of the finger.
inline bool item_right_of(const FingerPos& f, Key k) {
  return k > f.key || (k == f.key && f.before);
}

// Fixed set of f movable fingers over f+1 batched-finger-structure sectors in
// key order; sector s holds exactly the keys between fingers s-1 and s. A
// batch is processed as a finger phase (fingers in index order; one finger's
// moves combine, with crossing moves rejected and the net movement applied)
// followed by per-sector execution of the remaining operations. With zero
// fingers the single sector makes this behave exactly like the batched
// structure.
class MultiFingerMap {
 public:
  struct MoveCounters {
    std::uint64_t applied = 0;
    std::uint64_t rejected = 0;
    std::uint64_t far_chain = 0;   // moves handled by whole-sector repositioning
    std::uint64_t items_moved = 0;
  };

  // One finger just before each of `finger_keys` (which must be ascending).
  // `exec` enables parallel per-sector execution when it is a real pool;
  // without it (or with a serial executor) sectors run in key order on the
  // calling thread.
  explicit MultiFingerMap(std::vector<Key> finger_keys = {}, CostLedger* ledger = nullptr,
                          Executor* exec = nullptr);

  int finger_count() const { return static_cast<int>(fingers_.size()); }
  int sector_count() const { return static_cast<int>(sectors_.size()); }
  FingerPos finger(int index) const { return fingers_.at(static_cast<std::size_t>(index)); }
  const BatchFingerMap& sector(int index) const {
    return *sectors_.at(static_cast<std::size_t>(index));
  }
  // Which sector the key belongs to under the current finger positions.
  int sector_of(Key key) const;

  // Processes one batch synchronously: finger phase first, then the
  // remaining operations partitioned around the fingers and run per sector.
  // Moves of one finger combine: members report found=true/rejected as if
  // applied one after the other, and the finger's net movement (its last
  // accepted position) transfers items once.
  void process_batch(const std::vector<OpCall*>& calls);

  // Moves one finger directly. Returns false and leaves the structure
  // unchanged when the new position would cross a neighboring finger.
  // Throws std::out_of_range for a bad finger index.
  bool move_finger(int index, Key key, bool before = true);

  std::uint64_t size() const;
  std::vector<std::pair<Key, Value>> contents() const;
  // Per-sector structural checks plus finger/sector range consistency.
  std::vector<std::string> check_invariants() const;
  const std::vector<LinRecord>& linearization() const { return lin_; }
  MoveCounters move_counters() const { return counters_; }
  CostLedger* ledger() const { return ledger_; }

 private:
  bool apply_move(int index, FingerPos pos);
  // Transfers items between adjacent sectors when the moved range stays
  // within the donor's near chain (levels 0..k of the chain facing the
  // finger): cut the range into one run, join the receiver's facing levels
  // into its level k+1, refill from the run, rebalance both sectors.
  void transfer_near(SegmentedMap& donor, SegmentedMap& recv, int donor_side, int k_cut,
                     const FingerPos& pos);
  // Whole-sector repositioning for moves reaching past the donor's near
  // chain: both sectors are flattened by splits/joins and rebuilt around the
  // new boundary.
  void transfer_far(SegmentedMap& donor, SegmentedMap& recv, bool moving_right,
                    const FingerPos& pos);
  void rebalance_sector(SegmentedMap& s);
  static void flatten(SegmentedMap& s, BPMap& out);
  static void redistribute(SegmentedMap& s, BPMap all);
  // Entries of `m` landing left of the finger position.
  static std::uint64_t left_count(const BPMap& m, const FingerPos& pos);

  std::vector<FingerPos> fingers_;
  std::vector<std::unique_ptr<BatchFingerMap>> sectors_;
  std::vector<std::size_t> lin_taken_;  // per sector: linearization records copied so far
  std::vector<LinRecord> lin_;
  CostLedger* ledger_;
  Executor* exec_;
  MoveCounters counters_;
};

}  // namespace fingers
