#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fingers/ledger.hpp"
#include "fingers/ops.hpp"
#include "fingers/segment.hpp"
#include "fingers/sync.hpp"
#include "fingers/types.hpp"

namespace fingers {

// Shared four-phase batch engine (preliminary search, separation, execution,
// rebalancing) over a segment store. The batched structure runs it over the
// whole structure; the pipelined structure runs it restricted to the first
// slab and forwards the leftovers.
struct BatchRunConfig {
  // Number of first-slab sections (the slab boundary m).
  int first_slab_levels = 1;
  // Restrict execution and rebalancing to sections [0, m); residual groups
  // are returned instead of executed.
  bool restrict_to_first_slab = false;
  // Whether phase 4 may equalize the two chains. The pipelined first slab
  // only does this while no later stage exists to own the seam.
  bool chain_rebalance = true;
  // When the back chain continues beyond the slab, middle-key absorption must
  // stay strictly below this key (a snapshot of the next stage's coverage).
  std::optional<Key> first_slab_absorb_ceiling;
  // Gate on growing a chain (see SegmentedMap::SweepOptions::may_create).
  std::function<bool(int side, int level)> may_create;
  std::function<void(int side, int level)> on_create;
  std::function<void(int side, int level)> on_remove;
};

struct BatchRunResult {
  std::vector<std::pair<OpCall*, OpResult>> ineffectual;
  // Groups actually applied, with their pre-state (per access type).
  std::array<std::vector<GroupDelivery>, 4> executed;
  // Residual groups left unexecuted under restrict_to_first_slab.
  std::array<std::vector<OpGroup>, 4> leftover;
};

BatchRunResult run_batch_phases(SegmentedMap& store, const std::vector<OpCall*>& calls,
                                const BatchRunConfig& cfg);

// Limits on what the middle-key absorption rule may observe. Concurrent
// stages own disjoint level ranges, so a cut performed by one stage must only
// scan back-chain bounds within its own range and respect a pre-snapshotted
// ceiling for coverage beyond it.
struct CutBounds {
  int scan_lo = 0;
  int scan_hi = 1 << 20;  // inclusive
  std::optional<Key> ceiling;
};

// Cuts the key-sorted groups that fit segment (side, level) per the fits-in
// rule; `top_section` enables the middle-key absorption rule. Returns the
// cut; `groups` keeps the rest.
Batch<OpGroup> cut_fitting(Batch<OpGroup>& groups, const SegmentedMap& store, int side,
                           int level, bool top_section, const CutBounds& bounds = {});

// Number of first-slab sections for a batch of b operations.
int first_slab_levels_for_batch(std::uint64_t b);

// Batched finger structure: operations are gathered into batches; each batch
// runs the four phases over the whole structure. Results for a batch match
// a canonical sequential order (see emit_linearization).
class BatchFingerMap {
 public:
  explicit BatchFingerMap(CostLedger* ledger = nullptr) : ledger_(ledger) {}

  // Processes one batch synchronously (the operations' results and
  // completions are delivered before returning).
  void process_batch(const std::vector<OpCall*>& calls);

  // Asynchronous drive: buffered submissions are processed batch-at-a-time
  // on the executor via a reactivation-guarded task.
  void start(Executor* exec, int buffer_slots = 8);
  void submit(OpCall* call);

  const SegmentedMap& store() const { return store_; }
  SegmentedMap& mutable_store() { return store_; }
  std::uint64_t size() const { return store_.total_size(); }
  std::vector<std::pair<Key, Value>> contents() const { return store_.contents(); }
  std::vector<std::string> check_invariants() const { return store_.check_invariants(true); }
  const std::vector<LinRecord>& linearization() const { return lin_; }
  CostLedger* ledger() const { return ledger_; }

 private:
  void drain_inbox();

  SegmentedMap store_;
  CostLedger* ledger_;
  std::vector<LinRecord> lin_;
  std::unique_ptr<ParallelBuffer<OpCall*>> inbox_;
  ReactivationWrapper task_;
};

}  // namespace fingers
