#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <vector>

namespace fingers {

// Instrumented cost accounting. Work units are defined as:
//   - 1 per key comparison, and
//   - 1 per tree node touched during splits, joins and shifts.
// Span is approximated by the maximum nesting depth of charged units and is
// reported informationally only.
//
// Charges land in exactly one attribution bucket: the active operation id,
// or the rebalancing bucket, so that
//   total_work() == sum(per-op charges) + rebalance_work() + unattributed().
// Phase and per-level tallies are parallel views of the same totals.
class CostLedger {
 public:
  enum class Phase : int {
    kPreliminary = 0,
    kSeparation = 1,
    kExecution = 2,
    kRebalance = 3,
    kOther = 4,
  };
  static constexpr int kNumPhases = 5;
  static constexpr int kMaxLevels = 16;

  CostLedger() = default;

  // Enables per-operation attribution for op ids in [0, n).
  void configure_ops(std::uint64_t n) {
    per_op_ = std::make_unique<std::atomic<std::uint64_t>[]>(n);
    per_op_count_ = n;
    for (std::uint64_t i = 0; i < n; ++i) per_op_[i].store(0, std::memory_order_relaxed);
  }

  void reset() {
    comparisons_.store(0);
    node_touches_.store(0);
    rebalance_work_.store(0);
    unattributed_.store(0);
    max_depth_.store(0);
    for (auto& p : phase_work_) p.store(0);
    for (auto& s : section_work_) s.store(0);
    for (std::uint64_t i = 0; i < per_op_count_; ++i) per_op_[i].store(0);
  }

  std::uint64_t comparisons() const { return comparisons_.load(std::memory_order_relaxed); }
  std::uint64_t node_touches() const { return node_touches_.load(std::memory_order_relaxed); }
  std::uint64_t total_work() const { return comparisons() + node_touches(); }
  std::uint64_t rebalance_work() const { return rebalance_work_.load(std::memory_order_relaxed); }
  std::uint64_t unattributed() const { return unattributed_.load(std::memory_order_relaxed); }
  std::uint64_t max_depth() const { return max_depth_.load(std::memory_order_relaxed); }
  std::uint64_t phase_work(Phase p) const {
    return phase_work_[static_cast<int>(p)].load(std::memory_order_relaxed);
  }
  std::uint64_t section_work(int level) const {
    return level < kMaxLevels ? section_work_[level].load(std::memory_order_relaxed) : 0;
  }
  std::uint64_t op_charge(std::uint64_t id) const {
    return id < per_op_count_ ? per_op_[id].load(std::memory_order_relaxed) : 0;
  }
  std::uint64_t attributed_op_work() const {
    std::uint64_t s = 0;
    for (std::uint64_t i = 0; i < per_op_count_; ++i) s += per_op_[i].load(std::memory_order_relaxed);
    return s;
  }

  void add_op_charge(std::uint64_t id, std::uint64_t units) {
    if (id < per_op_count_) per_op_[id].fetch_add(units, std::memory_order_relaxed);
  }

  // Drains the unattributed bucket; batch runs call this to spread shared
  // phase work evenly over the batch's operations.
  std::uint64_t take_unattributed() { return unattributed_.exchange(0, std::memory_order_relaxed); }

  void charge_comparisons(std::uint64_t n = 1) { charge(n, true); }
  void charge_nodes(std::uint64_t n = 1) { charge(n, false); }

 private:
  friend class LedgerScope;
  friend CostLedger* active_ledger();
  friend class OpScope;
  friend class RebalanceScope;
  friend class PhaseScope;
  friend class SectionScope;
  friend class DepthScope;

  struct Ctx {
    CostLedger* ledger = nullptr;
    std::uint64_t op_id = kNoOp;
    Phase phase = Phase::kOther;
    int level = -1;
    bool rebalance = false;
    std::uint64_t depth = 0;
  };
  static constexpr std::uint64_t kNoOp = ~std::uint64_t{0};
  static Ctx& ctx() {
    thread_local Ctx c;
    return c;
  }

  void charge(std::uint64_t n, bool cmp) {
    if (cmp) {
      comparisons_.fetch_add(n, std::memory_order_relaxed);
    } else {
      node_touches_.fetch_add(n, std::memory_order_relaxed);
    }
    Ctx& c = ctx();
    phase_work_[static_cast<int>(c.phase)].fetch_add(n, std::memory_order_relaxed);
    if (c.level >= 0 && c.level < kMaxLevels) {
      section_work_[c.level].fetch_add(n, std::memory_order_relaxed);
    }
    if (c.rebalance) {
      rebalance_work_.fetch_add(n, std::memory_order_relaxed);
    } else if (c.op_id != kNoOp && c.op_id < per_op_count_) {
      per_op_[c.op_id].fetch_add(n, std::memory_order_relaxed);
    } else {
      unattributed_.fetch_add(n, std::memory_order_relaxed);
    }
    std::uint64_t d = c.depth;
    std::uint64_t cur = max_depth_.load(std::memory_order_relaxed);
    while (d > cur && !max_depth_.compare_exchange_weak(cur, d, std::memory_order_relaxed)) {
    }
  }

  std::atomic<std::uint64_t> comparisons_{0};
  std::atomic<std::uint64_t> node_touches_{0};
  std::atomic<std::uint64_t> rebalance_work_{0};
  std::atomic<std::uint64_t> unattributed_{0};
  std::atomic<std::uint64_t> max_depth_{0};
  std::array<std::atomic<std::uint64_t>, kNumPhases> phase_work_{};
  std::array<std::atomic<std::uint64_t>, kMaxLevels> section_work_{};
  std::unique_ptr<std::atomic<std::uint64_t>[]> per_op_;
  std::uint64_t per_op_count_ = 0;
};

// Installs a ledger as the active charge sink for the current thread.
class LedgerScope {
 public:
  explicit LedgerScope(CostLedger* ledger) : saved_(CostLedger::ctx()) {
    CostLedger::Ctx& c = CostLedger::ctx();
    c = CostLedger::Ctx{};
    c.ledger = ledger;
  }
  ~LedgerScope() { CostLedger::ctx() = saved_; }
  LedgerScope(const LedgerScope&) = delete;
  LedgerScope& operator=(const LedgerScope&) = delete;

 private:
  CostLedger::Ctx saved_;
};

inline CostLedger* active_ledger() { return CostLedger::ctx().ledger; }

inline void charge_cmp(std::uint64_t n = 1) {
  if (CostLedger* l = active_ledger()) l->charge_comparisons(n);
}
inline void charge_nodes(std::uint64_t n = 1) {
  if (CostLedger* l = active_ledger()) l->charge_nodes(n);
}

class OpScope {
 public:
  explicit OpScope(std::uint64_t op_id) : saved_(CostLedger::ctx()) {
    CostLedger::Ctx& c = CostLedger::ctx();
    c.op_id = op_id;
    c.rebalance = false;
  }
  ~OpScope() { CostLedger::ctx() = saved_; }
  OpScope(const OpScope&) = delete;
  OpScope& operator=(const OpScope&) = delete;

 private:
  CostLedger::Ctx saved_;
};

class RebalanceScope {
 public:
  RebalanceScope() : saved_(CostLedger::ctx()) {
    CostLedger::Ctx& c = CostLedger::ctx();
    c.rebalance = true;
    c.phase = CostLedger::Phase::kRebalance;
  }
  ~RebalanceScope() { CostLedger::ctx() = saved_; }
  RebalanceScope(const RebalanceScope&) = delete;
  RebalanceScope& operator=(const RebalanceScope&) = delete;

 private:
  CostLedger::Ctx saved_;
};

class PhaseScope {
 public:
  explicit PhaseScope(CostLedger::Phase p) : saved_(CostLedger::ctx()) {
    CostLedger::ctx().phase = p;
  }
  ~PhaseScope() { CostLedger::ctx() = saved_; }
  PhaseScope(const PhaseScope&) = delete;
  PhaseScope& operator=(const PhaseScope&) = delete;

 private:
  CostLedger::Ctx saved_;
};

class SectionScope {
 public:
  explicit SectionScope(int level) : saved_(CostLedger::ctx()) {
    CostLedger::ctx().level = level;
  }
  ~SectionScope() { CostLedger::ctx() = saved_; }
  SectionScope(const SectionScope&) = delete;
  SectionScope& operator=(const SectionScope&) = delete;

 private:
  CostLedger::Ctx saved_;
};

// Marks one level of parallel-eligible nesting for span accounting.
class DepthScope {
 public:
  DepthScope() { ++CostLedger::ctx().depth; }
  ~DepthScope() { --CostLedger::ctx().depth; }
  DepthScope(const DepthScope&) = delete;
  DepthScope& operator=(const DepthScope&) = delete;
};

}  // namespace fingers
