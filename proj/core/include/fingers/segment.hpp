#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fingers/bpmap.hpp"
#include "fingers/ledger.hpp"
#include "fingers/types.hpp"

namespace fingers {

// Doubly exponential level sizing. A level-k segment aims for target_size(k)
// items and counts as balanced while within slack(k) of its target capacity;
// the last segment of a chain has target capacity [0, target_size(k)].
inline std::uint64_t slack(int level) {
  if (level >= 5) return std::uint64_t{1} << 62;  // unreachable at any sane scale
  return std::uint64_t{1} << (std::uint64_t{1} << (level + 1));
}
inline std::uint64_t target_size(int level) { return 2 * slack(level); }

inline bool size_overfull(std::uint64_t size, int level) {
  return size > target_size(level) + slack(level);
}
inline bool size_underfull(std::uint64_t size, int level, bool last) {
  if (last) return false;
  return size + slack(level) < target_size(level);
}
inline bool size_balanced(std::uint64_t size, int level, bool last) {
  return !size_overfull(size, level) && !size_underfull(size, level, last);
}

// One segment: an ordered run of items plus cached bounds and the size other
// pipeline stages are allowed to observe (`advertised`). Live size and
// advertised size coincide except while a batch withholds updates.
struct Segment {
  BPMap store;
  Key lo = 0;
  Key hi = 0;
  std::atomic<std::uint64_t> advertised{0};

  std::uint64_t live_size() const { return store.size(); }
  std::uint64_t advertised_size() const { return advertised.load(std::memory_order_acquire); }
  bool empty() const { return store.empty(); }

  void refresh_bounds() {
    if (!store.empty()) {
      lo = store.min_key();
      hi = store.max_key();
    }
  }
  void publish_size() { advertised.store(store.size(), std::memory_order_release); }
  void refresh_and_publish() {
    refresh_bounds();
    publish_size();
  }
};

// Which end of the structure a chain grows from. Side 0 ascends from the
// global minimum; side 1 descends from the global maximum (its level-0
// segment holds the largest keys).
struct Placement {
  int side = 0;
  int level = 0;
  bool operator==(const Placement&) const = default;
};

// The two segment chains shared by all finger structure variants. Chains
// live in fixed-capacity slots with atomic lengths so pipelined readers can
// observe chain structure without tearing; slot contents are still protected
// by the owning structure's locking protocol.
class SegmentedMap {
 public:
  static constexpr int kMaxChainLevels = 16;

  SegmentedMap();

  int chain_length(int side) const { return len_[side].load(std::memory_order_acquire); }
  int last_level(int side) const { return chain_length(side) - 1; }
  // Highest level present on either chain.
  int top_level() const { return std::max(last_level(0), last_level(1)); }
  bool has_segment(int side, int level) const { return level >= 0 && level < chain_length(side); }
  Segment& segment(int side, int level) { return *chain_[side][level]; }
  const Segment& segment(int side, int level) const { return *chain_[side][level]; }
  bool is_last(int side, int level) const { return level == last_level(side); }

  std::uint64_t total_size() const;

  // Creates the empty segment at chain end; `level` must equal the current
  // length. Returns it.
  Segment& append_segment(int side);
  // Removes the chain's last segment (must be empty).
  void remove_last_segment(int side);

  // Fits-in rule: probes levels outward-in and returns the first segment
  // whose range admits the key; keys beyond every nonempty range land in the
  // front chain's last segment. `max_level` (exclusive) restricts the probe
  // to a slab; returns nullopt when the key fits no probed level.
  std::optional<Placement> locate(Key key, int max_level_exclusive = 1 << 20) const;

  bool segment_balanced(int side, int level) const {
    const Segment& s = segment(side, level);
    return size_balanced(s.live_size(), level, is_last(side, level));
  }
  bool segment_overfull(int side, int level) const {
    return size_overfull(segment(side, level).live_size(), level);
  }
  bool segment_underfull(int side, int level) const {
    return size_underfull(segment(side, level).live_size(), level, is_last(side, level));
  }

  // Moves `count` items from (side, level) to (side, level+1): the items
  // farthest from that side's finger.
  void shift_up(int side, int level, std::uint64_t count);
  // Moves `count` items from (side, level+1) down to (side, level).
  void shift_down(int side, int level, std::uint64_t count);

  // Redistributes items downward from the reservoir at `level` so that
  // segments [first underfull .. level-1] reach their targets or come as
  // close as the available items allow; emptied trailing segments are
  // removed. Returns the number of segments removed (a suffix of the chain,
  // which may include the reservoir itself).
  int fill_below(int side, int level);

  struct SweepOptions {
    // Rebalance only levels < limit (exclusive); creations beyond are
    // suppressed too.
    int level_limit = 1 << 20;
    // Invoked after a new segment is created at (side, level).
    std::function<void(int side, int level)> on_create;
    // Invoked after a segment at (side, level) is removed.
    std::function<void(int side, int level)> on_remove;
    // Skip rule: returns true when the execution phase never reached this
    // level, allowing the sweep to skip the rest of that slab.
    std::function<bool(int level)> exec_skipped;
    // Gate on growing a chain: consulted before creating a segment at
    // (side, level). Used by the pipelined variant to keep growth at a slab
    // boundary single-sided until the next stage takes over.
    std::function<bool(int side, int level)> may_create;
    // First level of the final slab (slab boundary for the skip rule).
    int slab_boundary = 1 << 20;
  };

  // Batched segment rebalancing sweep over one chain, small to big.
  void rebalance_sweep(int side, const SweepOptions& opts);

  // Batched chain rebalancing: equalizes chain lengths by whole-segment
  // transfer plus refills. Throws StructureError past `max_iterations`: two
  // always suffice after a batch, but finger moves induce bigger skews and
  // pass a looser cap. Callbacks as in SweepOptions.
  void rebalance_chains(const SweepOptions& opts, int max_iterations = 2);

  // Sequential single-segment cascade used by the one-op-at-a-time variant:
  // restores balance at (side, level) and cascades upward.
  void cascade_fix(int side, int level);
  // Sequential chain fix: single-shot length equalization.
  void chain_fix_sequential();

  // All (key, value) pairs in ascending key order.
  std::vector<std::pair<Key, Value>> contents() const;
  void for_each(const std::function<void(Key, Value)>& fn) const;

  // Publishes advertised sizes on every segment.
  void publish_all();

  // Structural self-checks; returns human-readable violations (empty = ok).
  // `strict_balance` additionally requires every segment balanced and equal
  // chain lengths (the quiescent invariant).
  std::vector<std::string> check_invariants(bool strict_balance) const;

  struct LevelInfo {
    int side;
    int level;
    std::uint64_t size;
    bool last;
    bool balanced;
  };
  std::vector<LevelInfo> level_info() const;

 private:
  friend class MultiFingerMap;
  friend class PipelinedFingerMap;

  // Moves the whole store of (from_side, level) into (to_side, level).
  void move_across(int from_side, int to_side, int level);
  // Moves `count` items adjacent to the middle from (from_side, from_level)
  // into (to_side, to_level) on the opposite chain.
  void cross_shift(int from_side, int from_level, int to_level, std::uint64_t count);
  // Pops empty segments off the chain tail (never level 0); returns count.
  int trim_empty_tail(int side);

  std::array<std::unique_ptr<Segment>, kMaxChainLevels> chain_[2];
  std::atomic<int> len_[2];
};

}  // namespace fingers
