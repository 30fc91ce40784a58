#include "fingers/batch_finger_map.hpp"

#include <algorithm>
#include <unordered_set>

namespace fingers {

int first_slab_levels_for_batch(std::uint64_t b) {
  if (b < 1) b = 1;
  unsigned __int128 bound = static_cast<unsigned __int128>(b) * 2;
  int e = 0;
  while (e < 6 && (static_cast<unsigned __int128>(1) << (std::uint64_t{1} << e)) < bound) ++e;
  return e + 1;
}

namespace {

std::optional<Key> back_chain_min(const SegmentedMap& store, int scan_lo, int scan_hi) {
  int deepest = std::min(store.chain_length(1) - 1, scan_hi);
  for (int lvl = deepest; lvl >= scan_lo; --lvl)
    if (!store.segment(1, lvl).empty()) return store.segment(1, lvl).lo;
  return std::nullopt;
}

}  // namespace

Batch<OpGroup> cut_fitting(Batch<OpGroup>& groups, const SegmentedMap& store, int side,
                           int level, bool top_section, const CutBounds& bounds) {
  using Ops = BatchOps<OpGroup>;
  auto less = [](Key a, Key b) { return a < b; };
  auto kf = [](const OpGroup& g) -> Key { return g.key; };
  const Segment& seg = store.segment(side, level);
  Batch<OpGroup> cut;
  if (side == 0) {
    if (top_section) {
      // Middle rule: the front chain's last segment absorbs every remaining
      // key below the back chain's coverage.
      std::optional<Key> boundary = back_chain_min(store, bounds.scan_lo, bounds.scan_hi);
      if (bounds.ceiling && (!boundary || *bounds.ceiling < *boundary))
        boundary = bounds.ceiling;
      if (boundary) {
        auto [lo, hi] = Ops::split_lt(groups, *boundary, less, kf);
        cut = lo;
        groups = hi;
      } else {
        cut = groups;
        groups = Batch<OpGroup>{};
      }
    } else if (!seg.empty()) {
      auto [lo, hi] = Ops::split_le(groups, seg.hi, less, kf);
      cut = lo;
      groups = hi;
    }
  } else if (!seg.empty()) {
    auto [lo, hi] = Ops::split_lt(groups, seg.lo, less, kf);
    cut = hi;
    groups = lo;
  }
  return cut;
}

namespace {

void exec_slab(SegmentedMap& store, TypedGroups& groups, int lo, int hi_exclusive, int& reach,
               std::array<std::vector<GroupDelivery>, 4>& executed, const CutBounds& bounds) {
  for (int k = lo; k < hi_exclusive; ++k) {
    if (k > store.top_level()) break;
    if (groups.all_empty()) break;
    reach = k;
    SectionScope sec(k);
    for (int side = 0; side < 2; ++side) {
      if (!store.has_segment(side, k)) continue;
      bool middle_here = (side == 0 && k == store.last_level(0));
      Segment& seg = store.segment(side, k);
      for (int a = 0; a < 4; ++a) {
        Batch<OpGroup>& g = groups.per_type[a];
        if (g.empty()) continue;
        Batch<OpGroup> cut = cut_fitting(g, store, side, k, middle_here, bounds);
        if (cut.empty()) continue;
        apply_groups(seg.store, cut, executed[a]);
        seg.refresh_bounds();
      }
    }
  }
}

}  // namespace

BatchRunResult run_batch_phases(SegmentedMap& store, const std::vector<OpCall*>& calls,
                                const BatchRunConfig& cfg) {
  BatchRunResult out;
  const int m = cfg.first_slab_levels;

  // Phase 1: preliminary unsorted searches through the first-slab sections,
  // removing operations once a section's range admits them.
  std::vector<OpCall*> remaining = calls;
  for (OpCall* c : remaining) c->tag = {};
  {
    PhaseScope ph(CostLedger::Phase::kPreliminary);
    int top = store.top_level();
    int probe_top = std::min(m - 1, top);
    for (int k = 0; k <= probe_top && !remaining.empty(); ++k) {
      SectionScope sec(k);
      for (int side = 0; side < 2; ++side) {
        if (!store.has_segment(side, k) || store.segment(side, k).empty()) continue;
        const Segment& seg = store.segment(side, k);
        for (OpCall* c : remaining) {
          OpScope os(c->op.id);
          if (auto v = seg.store.find(c->op.key)) {
            c->tag.found = true;
            c->tag.value = *v;
          }
        }
      }
      bool is_top = (k == top);
      std::vector<OpCall*> rest;
      rest.reserve(remaining.size());
      for (OpCall* c : remaining) {
        OpScope os(c->op.id);
        bool fits = false;
        int side = 0;
        if (store.has_segment(0, k) && !store.segment(0, k).empty()) {
          charge_cmp(1);
          if (c->op.key <= store.segment(0, k).hi) fits = true;
        }
        if (!fits && store.has_segment(1, k) && !store.segment(1, k).empty()) {
          charge_cmp(1);
          if (c->op.key >= store.segment(1, k).lo) {
            fits = true;
            side = 1;
          }
        }
        if (!fits && is_top) fits = true;  // middle keys: front chain's last segment
        if (fits) {
          c->tag.side = side;
          c->tag.level = k;
        } else {
          rest.push_back(c);
        }
      }
      remaining.swap(rest);
    }
  }

  // Phase 2: separate ineffectual operations (first-slab misses that no
  // batch insert will materialize) and entropy-sort the rest into groups.
  TypedGroups effectual, residual;
  {
    PhaseScope ph(CostLedger::Phase::kSeparation);
    std::unordered_set<Key> inserted;
    for (OpCall* c : calls)
      if (c->tag.level >= 0 && c->op.type == OpType::kInsert) inserted.insert(c->op.key);
    std::vector<OpCall*> effectual_calls;
    effectual_calls.reserve(calls.size());
    for (OpCall* c : calls) {
      if (c->tag.level < 0) continue;
      charge_cmp(1);
      if (!c->tag.found && c->op.type != OpType::kInsert && !inserted.count(c->op.key)) {
        out.ineffectual.emplace_back(c, OpResult{false, 0, false});
      } else {
        effectual_calls.push_back(c);
      }
    }
    effectual = build_groups(effectual_calls);
    residual = build_groups(remaining);
  }

  // Phase 3: execute section by section, each segment taking its fitting
  // groups as one batched access.
  int reach_first = -1, reach_final = -1;
  {
    PhaseScope ph(CostLedger::Phase::kExecution);
    CutBounds first_bounds;
    first_bounds.scan_hi = m - 1;
    first_bounds.ceiling = cfg.first_slab_absorb_ceiling;
    exec_slab(store, effectual, 0, m, reach_first, out.executed, first_bounds);
    if (cfg.restrict_to_first_slab) {
      for (int t = 0; t < 4; ++t) {
        residual.per_type[t].for_each(
            [&](const OpGroup& g) { out.leftover[t].push_back(g); });
      }
    } else {
      exec_slab(store, residual, m, 1 << 20, reach_final, out.executed, CutBounds{});
    }
  }

  // Phase 4: segment rebalancing sweeps, then chain rebalancing.
  {
    RebalanceScope rb;
    SegmentedMap::SweepOptions opts;
    opts.level_limit = cfg.restrict_to_first_slab ? m : (1 << 20);
    opts.may_create = cfg.may_create;
    opts.on_create = cfg.on_create;
    opts.on_remove = cfg.on_remove;
    opts.slab_boundary = m;
    opts.exec_skipped = [&reach_first, &reach_final, m](int k) {
      return k < m ? k > reach_first : k > reach_final;
    };
    store.rebalance_sweep(0, opts);
    store.rebalance_sweep(1, opts);
    // Growth into the slab boundary leaves an empty segment there awaiting
    // the successor's pull; equalizing now would see nothing to move and
    // undo the growth. From that point the seam belongs to the successor.
    bool grew_to_boundary =
        cfg.restrict_to_first_slab &&
        std::max(store.chain_length(0), store.chain_length(1)) > m;
    if (cfg.chain_rebalance && !grew_to_boundary) store.rebalance_chains(opts);
  }
  return out;
}

void BatchFingerMap::process_batch(const std::vector<OpCall*>& calls) {
  if (calls.empty()) return;
  LedgerScope ls(ledger_);
  BatchRunConfig cfg;
  cfg.first_slab_levels = first_slab_levels_for_batch(calls.size());
  BatchRunResult r = run_batch_phases(store_, calls, cfg);

  for (auto& [call, res] : r.ineffectual) {
    call->result = res;
    call->complete();
  }
  for (const auto& per_type : r.executed) deliver(per_type);
  emit_linearization(r.ineffectual, r.executed, lin_);
  store_.publish_all();

  if (ledger_) {
    // Shared phase work (separation + execution) is spread evenly across the
    // batch; the remainder goes to the batch's first operations.
    std::uint64_t shared = ledger_->take_unattributed();
    std::uint64_t share = shared / calls.size();
    std::uint64_t extra = shared % calls.size();
    for (std::size_t i = 0; i < calls.size(); ++i)
      ledger_->add_op_charge(calls[i]->op.id, share + (i < extra ? 1 : 0));
  }
}

void BatchFingerMap::start(Executor* exec, int buffer_slots) {
  task_.configure(exec, [this] { drain_inbox(); });
  inbox_ = std::make_unique<ParallelBuffer<OpCall*>>(buffer_slots, [this] { task_.reactivate(); });
}

void BatchFingerMap::submit(OpCall* call) {
  if (!inbox_) throw StructureError("submit before start()");
  inbox_->submit(call);
}

void BatchFingerMap::drain_inbox() {
  std::vector<OpCall*> batch = inbox_->flush();
  if (!batch.empty()) process_batch(batch);
}

}  // namespace fingers
