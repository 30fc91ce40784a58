#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fingers/batch_finger_map.hpp"
#include "fingers/ledger.hpp"
#include "fingers/ops.hpp"
#include "fingers/segment.hpp"
#include "fingers/sync.hpp"
#include "fingers/types.hpp"

namespace fingers {

// Pipelined finger structure. Submissions land in a relaxed-order buffer and
// are cut into bunches of exactly p*p operations; a non-pipelined first slab
// of m sections processes one bunch per run and forwards residual
// group-operations to section m. Every section at level >= m owns a buffer of
// pending group-operations and runs as an independent reactivatable task;
// adjacent stages are serialized by dedicated two-key locks and a deferral
// protocol that lets a congested or imbalanced successor drain before its
// predecessor pushes more work.
class PipelinedFingerMap {
 public:
  struct Counters {
    std::uint64_t first_runs = 0;
    std::uint64_t section_runs = 0;
    std::uint64_t first_deferrals = 0;
    std::uint64_t section_deferrals = 0;
    std::uint64_t recirculated = 0;
    std::uint64_t results_delivered = 0;
    // One slot per balance invariant (see check_invariants); nonzero means a
    // concurrent spot check failed.
    std::array<std::uint64_t, 5> invariant_violations{};
  };

  // One processing run's span in the global event order. Section entries
  // cover the lock-held body; level -1 is a whole first-slab run.
  struct ActivityEvent {
    int level = 0;
    std::uint64_t begin_seq = 0;
    std::uint64_t end_seq = 0;
  };

  PipelinedFingerMap(int parallelism, Executor* exec, CostLedger* ledger = nullptr);

  // Waits for every stage task to settle before tearing the stores down (a
  // reactivation can post its task slightly after the pool looks idle).
  ~PipelinedFingerMap();

  // Buffers one operation and reactivates the first slab. The call completes
  // when its operation finishes in whichever stage it fits; wait on the call
  // or quiesce the executor before reading results.
  void submit(OpCall* call);

  int first_slab_levels() const { return m_; }
  std::uint64_t cut_batch_size() const { return cut_; }

  // Quiescent-only introspection: no run may be executing or pending.
  const SegmentedMap& store() const { return store_; }
  std::uint64_t size() const { return store_.total_size(); }
  std::vector<std::pair<Key, Value>> contents() const { return store_.contents(); }
  // Structural checks plus the pipelined balance invariants:
  //   1. first-slab segments balanced below m-1, at most 2*target at m-1;
  //   2. (spot-checked) predecessor fixes land exactly on target;
  //   3. (spot-checked) last section leaves equal chains when not growing;
  //   4. section buffers hold at most 2*slack(k-1) operations;
  //   5. section segments hold at most 2*target(k), at least slack(k-1)
  //      unless last.
  std::vector<std::string> check_invariants() const;
  bool idle() const;

  std::vector<LinRecord> linearization() const;
  std::vector<ActivityEvent> activity_log() const;
  Counters counters() const;
  CostLedger* ledger() const { return ledger_; }

 private:
  // Pending group-operations for one section, merged per (type, key);
  // op_count counts individual member operations.
  struct SectionBuffer {
    std::array<std::map<Key, Bunch<OpGroup>>, 4> per_type;
    std::uint64_t op_count = 0;

    void add(const OpGroup& g);
    // Removes type t's pending groups, one combined group per key,
    // ascending.
    std::vector<OpGroup> drain_type(int t);
    bool empty() const { return op_count == 0; }
  };

  // Task machinery for one final-slab section. Pre-built for every level so
  // chain growth never mutates this array; `exists` tracks whether any
  // level-k segment is present. The buffer and deferred flag are guarded by
  // lock (the lock between S[k-1] and S[k]; key 0 = lower stage, key 1 =
  // this section).
  struct Section {
    int level = 0;
    std::atomic<bool> exists{false};
    std::atomic<bool> deferred{false};
    SectionBuffer buffer;
    ReactivationWrapper task;
    DedicatedLock lock{2};
  };

  Section& sec(int level) { return *sections_[static_cast<std::size_t>(level - m_)]; }
  const Section& sec(int level) const {
    return *sections_[static_cast<std::size_t>(level - m_)];
  }

  void first_slab_run();
  void section_run(int k);

  void refresh_exists(int level);
  void publish_first_slab();
  bool first_slab_edge_imbalanced() const;  // advertised sizes of S[m-1]
  void recirculate_group(const OpGroup& g);
  void append_lin(std::vector<LinRecord>&& recs);
  void log_activity(int level, std::uint64_t begin);
  void attribute_run(const std::vector<std::uint64_t>& op_ids);
  void spot_check_first_slab_idle();

  SegmentedMap store_;
  CostLedger* ledger_;
  Executor* exec_;
  int p_;
  std::uint64_t cut_;
  int m_;

  std::unique_ptr<ParallelBuffer<OpCall*>> inbox_;
  std::deque<Bunch<OpCall*>> feed_;  // first-slab task only
  ReactivationWrapper first_task_;
  std::atomic<bool> first_deferred_{false};

  std::vector<std::unique_ptr<Section>> sections_;

  std::atomic<std::uint64_t> seq_{0};
  mutable std::mutex lin_mu_;
  std::vector<LinRecord> lin_;
  mutable std::mutex act_mu_;
  std::vector<ActivityEvent> activity_;

  std::atomic<std::uint64_t> first_runs_{0};
  std::atomic<std::uint64_t> section_runs_{0};
  std::atomic<std::uint64_t> first_deferrals_{0};
  std::atomic<std::uint64_t> section_deferrals_{0};
  std::atomic<std::uint64_t> recirculated_{0};
  std::atomic<std::uint64_t> results_delivered_{0};
  std::array<std::atomic<std::uint64_t>, 5> violations_{};
};

}  // namespace fingers
