#include "fingers/pipelined_finger_map.hpp"

#include <algorithm>
#include <bit>
#include <thread>

namespace fingers {

namespace {

// Smallest m with 2^(2^m) >= 5 p^2: the first slab is just deep enough that
// section m-1's slack dwarfs a cut batch.
int slab_levels_for(std::uint64_t cut) {
  unsigned __int128 bound = static_cast<unsigned __int128>(cut) * 5;
  int e = 0;
  while (e < 6 && (static_cast<unsigned __int128>(1) << (std::uint64_t{1} << e)) < bound) ++e;
  return e;
}

}  // namespace

void PipelinedFingerMap::SectionBuffer::add(const OpGroup& g) {
  auto& bucket = per_type[static_cast<std::size_t>(type_rank(g.type))];
  charge_cmp(std::bit_width(bucket.size() + 1));
  charge_nodes(1);
  bucket[g.key].add(Batch<OpGroup>::single(g));
  op_count += g.members.size();
}

std::vector<OpGroup> PipelinedFingerMap::SectionBuffer::drain_type(int t) {
  auto& bucket = per_type[static_cast<std::size_t>(t)];
  std::vector<OpGroup> out;
  out.reserve(bucket.size());
  for (auto& [key, bunch] : bucket) {
    OpGroup combined;
    bool first = true;
    bunch.to_batch().for_each([&](const OpGroup& g) {
      if (first) {
        combined = g;
        first = false;
      } else {
        combined.members = Bundle<OpCall*>::combine(combined.members, g.members);
        combined.effect = g.effect;
      }
    });
    op_count -= combined.members.size();
    out.push_back(std::move(combined));
  }
  bucket.clear();
  return out;
}

PipelinedFingerMap::PipelinedFingerMap(int parallelism, Executor* exec, CostLedger* ledger)
    : ledger_(ledger), exec_(exec), p_(parallelism < 1 ? 1 : parallelism) {
  cut_ = static_cast<std::uint64_t>(p_) * static_cast<std::uint64_t>(p_);
  m_ = slab_levels_for(cut_);
  // Machinery for every level the chains could ever reach, plus one slot so
  // the top section always has an upper lock partner. Sections lie dormant
  // (exists == false) until a segment appears at their level.
  for (int level = m_; level <= SegmentedMap::kMaxChainLevels; ++level) {
    auto s = std::make_unique<Section>();
    s->level = level;
    s->task.configure(exec_, [this, level] { section_run(level); });
    sections_.push_back(std::move(s));
  }
  first_task_.configure(exec_, [this] { first_slab_run(); });
  int slots = std::max(8, 2 * p_);
  inbox_ = std::make_unique<ParallelBuffer<OpCall*>>(slots, [this] { first_task_.reactivate(); });
}

PipelinedFingerMap::~PipelinedFingerMap() {
  // With a thread pool, a stage task can be posted a moment after the pool
  // reports idle (reactivate() registers, then posts). pending() covers that
  // window, so spinning until two consecutive clean sweeps guarantees no run
  // can touch the stores once teardown proceeds. A serial executor cannot run
  // anything concurrently with this destructor, and its leftover queue
  // entries are discarded un-run, so there is nothing to wait for.
  if (!exec_ || exec_->serial()) return;
  auto settled = [this] {
    if (first_task_.pending()) return false;
    for (const auto& sp : sections_)
      if (sp->task.pending()) return false;
    return true;
  };
  int clean = 0;
  while (clean < 2) {
    if (settled()) {
      ++clean;
    } else {
      clean = 0;
      std::this_thread::yield();
    }
  }
}

void PipelinedFingerMap::submit(OpCall* call) { inbox_->submit(call); }

bool PipelinedFingerMap::first_slab_edge_imbalanced() const {
  int level = m_ - 1;
  for (int side = 0; side < 2; ++side) {
    if (!store_.has_segment(side, level)) continue;
    std::uint64_t adv = store_.segment(side, level).advertised_size();
    bool last = store_.last_level(side) == level;
    if (size_overfull(adv, level) || size_underfull(adv, level, last)) return true;
  }
  return false;
}

void PipelinedFingerMap::first_slab_run() {
  LedgerScope ls(ledger_);
  // Step 1: nothing buffered means quiescence (the unconditional
  // self-reactivation at the end funnels every stream here eventually).
  if (!inbox_->maybe_nonempty() && feed_.empty()) {
    spot_check_first_slab_idle();
    return;
  }
  first_runs_.fetch_add(1, std::memory_order_relaxed);

  // Steps 2-4: with a successor stage present, consult it before taking on
  // more work. An imbalanced slab edge or a congested successor buffer means
  // the successor must run first: set the deferred flag and stand down.
  Section& sm = sec(m_);
  bool sm_existed = sm.exists.load(std::memory_order_acquire);
  std::optional<Key> ceiling;
  if (sm_existed) {
    sm.lock.acquire(0);
    if (sm.exists.load(std::memory_order_relaxed)) {
      if (first_slab_edge_imbalanced() || sm.buffer.op_count > slack(m_ - 1)) {
        first_deferred_.store(true, std::memory_order_release);
        first_deferrals_.fetch_add(1, std::memory_order_relaxed);
        sm.lock.release();
        sm.task.reactivate();
        return;
      }
      // Snapshot how far down the back chain's coverage reaches at the slab
      // edge; this run's middle-key absorption must stay strictly below it.
      if (store_.has_segment(1, m_) && !store_.segment(1, m_).empty())
        ceiling = store_.segment(1, m_).lo;
    } else {
      sm_existed = false;
    }
    sm.lock.release();
  }

  // Step 5: cut new arrivals into bunches of exactly cut_ operations,
  // topping up the previous partial bunch first.
  std::vector<OpCall*> arrivals = inbox_->flush();
  std::size_t i = 0;
  if (!feed_.empty() && feed_.back().op_count() < cut_) {
    std::size_t take =
        std::min<std::size_t>(static_cast<std::size_t>(cut_ - feed_.back().op_count()),
                              arrivals.size());
    if (take > 0) {
      feed_.back().add(Batch<OpCall*>::from_items(arrivals.begin(), arrivals.begin() + take));
      i = take;
    }
  }
  while (i < arrivals.size()) {
    std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(cut_), arrivals.size() - i);
    Bunch<OpCall*> b;
    b.add(Batch<OpCall*>::from_items(arrivals.begin() + static_cast<std::ptrdiff_t>(i),
                                     arrivals.begin() + static_cast<std::ptrdiff_t>(i + take)));
    feed_.push_back(std::move(b));
    i += take;
  }
  if (feed_.empty()) return;  // the notification raced an earlier flush

  // Step 6: one cut batch per run.
  std::uint64_t begin = seq_.fetch_add(1, std::memory_order_relaxed);
  Bunch<OpCall*> bunch = std::move(feed_.front());
  feed_.pop_front();
  std::vector<OpCall*> batch;
  batch.reserve(bunch.op_count());
  bunch.to_batch().for_each([&](OpCall* const& c) { batch.push_back(c); });

  // Step 7: the four phases, restricted to the first slab. While a successor
  // stage exists it owns the seam: chain equalization is skipped, growth to
  // level m stays single-sided, and slab-edge sizes are withheld until this
  // run publishes them below.
  BatchRunConfig cfg;
  cfg.first_slab_levels = m_;
  cfg.restrict_to_first_slab = true;
  cfg.chain_rebalance = !sm_existed;
  cfg.first_slab_absorb_ceiling = ceiling;
  cfg.may_create = [this](int, int level) {
    return level < m_ || !sec(m_).exists.load(std::memory_order_acquire);
  };
  cfg.on_create = [this](int, int level) {
    if (level >= m_) sec(level).exists.store(true, std::memory_order_release);
  };
  cfg.on_remove = [this](int, int level) {
    if (level >= m_) refresh_exists(level);
  };
  BatchRunResult r = run_batch_phases(store_, batch, cfg);

  for (auto& [call, res] : r.ineffectual) {
    call->result = res;
    call->complete();
  }
  for (const auto& per_type : r.executed) deliver(per_type);

  std::vector<LinRecord> recs;
  emit_linearization(r.ineffectual, r.executed, recs);
  results_delivered_.fetch_add(recs.size(), std::memory_order_relaxed);

  // Steps 8-10: hand residuals to the successor section and make this run's
  // slab sizes visible, all inside the boundary lock region.
  bool leftovers = false;
  for (const auto& lg : r.leftover) leftovers = leftovers || !lg.empty();
  bool handed_off = false;
  if (sec(m_).exists.load(std::memory_order_acquire)) {
    Section& sm2 = sec(m_);
    sm2.lock.acquire(0);
    if (sm2.exists.load(std::memory_order_relaxed)) {
      for (const auto& lg : r.leftover)
        for (const OpGroup& g : lg) sm2.buffer.add(g);
      if (sm2.buffer.op_count > 2 * slack(m_ - 1))
        violations_[3].fetch_add(1, std::memory_order_relaxed);
      publish_first_slab();
      handed_off = true;
      sm2.task.reactivate();
    }
    sm2.lock.release();
  }
  if (!handed_off) {
    // No live successor: residuals can only mean the structure shrank out
    // from under them mid-run. Send them around again.
    if (leftovers)
      for (const auto& lg : r.leftover)
        for (const OpGroup& g : lg) recirculate_group(g);
    publish_first_slab();
  }

  append_lin(std::move(recs));
  if (ledger_) {
    std::vector<std::uint64_t> ids;
    ids.reserve(batch.size());
    for (OpCall* c : batch) ids.push_back(c->op.id);
    attribute_run(ids);
  }
  log_activity(-1, begin);

  // Step 11: keep going while work remains; the next step-1 check is the
  // quiescence point.
  first_task_.reactivate();
}

void PipelinedFingerMap::section_run(int k) {
  Section& s = sec(k);
  if (!s.exists.load(std::memory_order_acquire)) return;  // dormant machinery poked
  LedgerScope ls(ledger_);
  section_runs_.fetch_add(1, std::memory_order_relaxed);

  // Step 1: both neighbour locks, in the alternating order that keeps the
  // acquisition graph acyclic. This section is its lower lock's upper party
  // (key 1) and its upper lock's lower party (key 0).
  Section& succ = sec(k + 1);
  bool lower_lock_first = ((k - m_) % 2) == 0;
  if (lower_lock_first) {
    s.lock.acquire(1);
    succ.lock.acquire(0);
  } else {
    succ.lock.acquire(0);
    s.lock.acquire(1);
  }
  std::uint64_t begin = seq_.fetch_add(1, std::memory_order_relaxed);
  auto release_locks = [&] {
    if (lower_lock_first) {
      succ.lock.release();
      s.lock.release();
    } else {
      s.lock.release();
      succ.lock.release();
    }
  };
  if (!s.exists.load(std::memory_order_relaxed)) {  // removed before we got the locks
    release_locks();
    return;
  }

  // Step 2: defer when the successor should act first — it pulls our
  // imbalance straight, and a congested successor buffer must drain before
  // we add to it. Without a successor we proceed; growth happens below.
  bool succ_exists = succ.exists.load(std::memory_order_acquire);
  bool own_imbalanced = false;
  for (int side = 0; side < 2; ++side) {
    if (!store_.has_segment(side, k)) continue;
    std::uint64_t sz = store_.segment(side, k).live_size();
    bool last = store_.last_level(side) == k;
    if (size_overfull(sz, k) || size_underfull(sz, k, last)) own_imbalanced = true;
  }
  if (succ_exists && (own_imbalanced || succ.buffer.op_count > slack(k))) {
    s.deferred.store(true, std::memory_order_release);
    section_deferrals_.fetch_add(1, std::memory_order_relaxed);
    log_activity(k, begin);
    release_locks();
    succ.task.reactivate();
    return;
  }

  // Step 3: flush pending group-operations type by type, cut what fits this
  // section's segments, apply, fork the result delivery, and forward the
  // rest to the successor's buffer.
  std::array<std::vector<GroupDelivery>, 4> executed;
  bool forwarded = false;
  {
    PhaseScope ph(CostLedger::Phase::kExecution);
    SectionScope ss(k);
    for (int a = 0; a < 4; ++a) {
      std::vector<OpGroup> pending = s.buffer.drain_type(a);
      if (pending.empty()) continue;
      Batch<OpGroup> g = Batch<OpGroup>::from_vector(pending);
      for (int side = 0; side < 2 && !g.empty(); ++side) {
        if (!store_.has_segment(side, k)) continue;
        bool middle_here = (side == 0 && k == store_.last_level(0));
        CutBounds bounds;
        bounds.scan_lo = k;
        bounds.scan_hi = k + 1;
        Batch<OpGroup> cut = cut_fitting(g, store_, side, k, middle_here, bounds);
        if (cut.empty()) continue;
        Segment& seg = store_.segment(side, k);
        apply_groups(seg.store, cut, executed[a]);
        seg.refresh_and_publish();
      }
      if (!g.empty()) {
        if (succ.exists.load(std::memory_order_relaxed)) {
          g.for_each([&](const OpGroup& gr) { succ.buffer.add(gr); });
          if (succ.buffer.op_count > 2 * slack(k))
            violations_[3].fetch_add(1, std::memory_order_relaxed);
          forwarded = true;
        } else {
          // Keys beyond every segment we own, with no successor to take
          // them: the structure shrank; recycle through the first slab.
          g.for_each([&](const OpGroup& gr) { recirculate_group(gr); });
        }
      }
      if (!executed[a].empty()) {
        auto forked = std::make_shared<std::vector<GroupDelivery>>(executed[a]);
        std::uint64_t n = 0;
        for (const auto& d : *forked) n += d.group.members.size();
        exec_->post([this, forked, n] {
          deliver(*forked);
          results_delivered_.fetch_add(n, std::memory_order_relaxed);
        });
      }
    }
  }
  if (forwarded) succ.task.reactivate();

  // Step 4a: local rebalancing of the predecessor level, by advertised size
  // (equal to the live size whenever the protocol lets this fire).
  bool created = false;
  {
    RebalanceScope rb;
    for (int side = 0; side < 2; ++side) {
      if (!store_.has_segment(side, k)) continue;
      if (store_.has_segment(side, k - 1)) {
        Segment& below = store_.segment(side, k - 1);
        std::uint64_t adv = below.advertised_size();
        if (size_overfull(adv, k - 1)) {
          store_.shift_up(side, k - 1, adv - target_size(k - 1));
          below.publish_size();
          store_.segment(side, k).publish_size();
          if (below.live_size() != target_size(k - 1))
            violations_[1].fetch_add(1, std::memory_order_relaxed);
        } else if (size_underfull(adv, k - 1, false)) {
          std::uint64_t need = target_size(k - 1) - adv;
          std::uint64_t take = std::min(need, store_.segment(side, k).live_size());
          store_.shift_down(side, k - 1, take);
          below.publish_size();
          store_.segment(side, k).publish_size();
          if (take == need && below.live_size() != target_size(k - 1))
            violations_[1].fetch_add(1, std::memory_order_relaxed);
          if (store_.segment(side, k).empty() && store_.last_level(side) == k) {
            store_.remove_last_segment(side);
            refresh_exists(k);
          }
        }
      }
      // Still overfull at the end of its chain: grow, and wake the new
      // section to pull the overflow.
      if (store_.has_segment(side, k) && store_.last_level(side) == k &&
          size_overfull(store_.segment(side, k).live_size(), k)) {
        store_.append_segment(side);
        store_.segment(side, k + 1).publish_size();
        succ.exists.store(true, std::memory_order_release);
        created = true;
      }
    }
    if (created) succ.task.reactivate();

    // Step 4b: the last section also owns the seam between the chains.
    if (!created && k == store_.top_level() && s.exists.load(std::memory_order_relaxed)) {
      int len0 = store_.chain_length(0);
      int len1 = store_.chain_length(1);
      if (len0 != len1) {
        int longer = len0 > len1 ? 0 : 1;
        int shorter = 1 - longer;
        if (store_.chain_length(shorter) != k)
          throw StructureError("chain gap at last section");
        store_.append_segment(shorter);
        store_.move_across(longer, shorter, k);
        store_.segment(longer, k).publish_size();
        Segment& moved = store_.segment(shorter, k);
        moved.publish_size();
        if (store_.has_segment(shorter, k - 1)) {
          Segment& below = store_.segment(shorter, k - 1);
          std::uint64_t adv = below.advertised_size();
          if (size_underfull(adv, k - 1, false)) {
            std::uint64_t need = target_size(k - 1) - adv;
            std::uint64_t take = std::min(need, moved.live_size());
            store_.shift_down(shorter, k - 1, take);
            below.publish_size();
            moved.publish_size();
          }
        }
        if (moved.empty()) {
          store_.remove_last_segment(shorter);
          store_.remove_last_segment(longer);
          refresh_exists(k);
        }
      }
      if (s.exists.load(std::memory_order_relaxed)) {
        // A finishing last section that did not grow the structure leaves
        // balanced segments and equal chains.
        bool ok = store_.chain_length(0) == store_.chain_length(1);
        for (int side = 0; side < 2 && ok; ++side)
          if (store_.has_segment(side, k) && !store_.segment_balanced(side, k)) ok = false;
        if (!ok) violations_[2].fetch_add(1, std::memory_order_relaxed);
      }
    }
  }
  for (int side = 0; side < 2; ++side)
    if (store_.has_segment(side, k) &&
        store_.segment(side, k).live_size() > 2 * target_size(k))
      violations_[4].fetch_add(1, std::memory_order_relaxed);

  // Steps 5-6: a deferred predecessor was waiting on this run; clear and
  // rewake it.
  if (k == m_) {
    if (first_deferred_.exchange(false, std::memory_order_acq_rel)) first_task_.reactivate();
  } else if (sec(k - 1).deferred.exchange(false, std::memory_order_acq_rel)) {
    sec(k - 1).task.reactivate();
  }

  if (ledger_) {
    std::vector<std::uint64_t> ids;
    for (const auto& per : executed)
      for (const auto& d : per)
        d.group.members.for_each([&](OpCall* const& c) { ids.push_back(c->op.id); });
    attribute_run(ids);
  }
  if (!executed[0].empty() || !executed[1].empty() || !executed[2].empty() ||
      !executed[3].empty()) {
    std::vector<LinRecord> recs;
    std::vector<std::pair<OpCall*, OpResult>> no_ineffectual;
    emit_linearization(no_ineffectual, executed, recs);
    append_lin(std::move(recs));
  }
  log_activity(k, begin);

  // Step 7: release.
  release_locks();
}

void PipelinedFingerMap::refresh_exists(int level) {
  bool present = store_.has_segment(0, level) || store_.has_segment(1, level);
  sec(level).exists.store(present, std::memory_order_release);
}

void PipelinedFingerMap::publish_first_slab() {
  for (int side = 0; side < 2; ++side) {
    int hi = std::min(m_ - 1, store_.last_level(side));
    for (int level = 0; level <= hi; ++level) store_.segment(side, level).publish_size();
  }
}

void PipelinedFingerMap::recirculate_group(const OpGroup& g) {
  g.members.for_each([&](OpCall* const& c) {
    recirculated_.fetch_add(1, std::memory_order_relaxed);
    inbox_->submit(c);
  });
}

void PipelinedFingerMap::append_lin(std::vector<LinRecord>&& recs) {
  if (recs.empty()) return;
  std::lock_guard<std::mutex> g(lin_mu_);
  lin_.insert(lin_.end(), recs.begin(), recs.end());
}

void PipelinedFingerMap::log_activity(int level, std::uint64_t begin) {
  std::uint64_t end = seq_.fetch_add(1, std::memory_order_relaxed);
  std::lock_guard<std::mutex> g(act_mu_);
  activity_.push_back({level, begin, end});
}

void PipelinedFingerMap::attribute_run(const std::vector<std::uint64_t>& op_ids) {
  if (!ledger_ || op_ids.empty()) return;
  std::uint64_t shared = ledger_->take_unattributed();
  if (shared == 0) return;
  std::uint64_t share = shared / op_ids.size();
  std::uint64_t extra = shared % op_ids.size();
  for (std::size_t i = 0; i < op_ids.size(); ++i)
    ledger_->add_op_charge(op_ids[i], share + (i < extra ? 1 : 0));
}

void PipelinedFingerMap::spot_check_first_slab_idle() {
  for (int side = 0; side < 2; ++side) {
    int last = store_.last_level(side);
    for (int level = 0; level <= std::min(m_ - 2, last); ++level)
      if (!store_.segment_balanced(side, level))
        violations_[0].fetch_add(1, std::memory_order_relaxed);
    if (m_ - 1 <= last &&
        store_.segment(side, m_ - 1).advertised_size() > 2 * target_size(m_ - 1))
      violations_[0].fetch_add(1, std::memory_order_relaxed);
  }
}

std::vector<std::string> PipelinedFingerMap::check_invariants() const {
  std::vector<std::string> out = store_.check_invariants(false);
  auto complain = [&](std::string msg) { out.push_back(std::move(msg)); };
  for (int side = 0; side < 2; ++side) {
    int last = store_.last_level(side);
    for (int level = 0; level <= last; ++level) {
      std::uint64_t sz = store_.segment(side, level).live_size();
      std::string where = "S" + std::to_string(side) + "[" + std::to_string(level) + "]";
      if (level <= m_ - 2) {
        if (!store_.segment_balanced(side, level))
          complain(where + ": first-slab segment imbalanced");
      } else if (level == m_ - 1) {
        if (sz > 2 * target_size(level)) complain(where + ": slab edge above twice target");
      } else {
        if (sz > 2 * target_size(level)) complain(where + ": section above twice target");
        if (level != last && sz < slack(level - 1))
          complain(where + ": non-last section below its floor");
      }
    }
  }
  if (store_.chain_length(0) != store_.chain_length(1))
    complain("chains unequal at quiescence");
  for (const auto& sp : sections_)
    if (!sp->buffer.empty())
      complain("section " + std::to_string(sp->level) + " buffer not empty at quiescence");
  for (std::size_t i = 0; i < violations_.size(); ++i) {
    std::uint64_t v = violations_[i].load(std::memory_order_relaxed);
    if (v != 0)
      complain("balance invariant " + std::to_string(i + 1) + " violated " +
               std::to_string(v) + " time(s)");
  }
  return out;
}

bool PipelinedFingerMap::idle() const {
  if (inbox_->maybe_nonempty() || !feed_.empty()) return false;
  for (const auto& sp : sections_)
    if (!sp->buffer.empty()) return false;
  return true;
}

std::vector<LinRecord> PipelinedFingerMap::linearization() const {
  std::lock_guard<std::mutex> g(lin_mu_);
  return lin_;
}

std::vector<PipelinedFingerMap::ActivityEvent> PipelinedFingerMap::activity_log() const {
  std::lock_guard<std::mutex> g(act_mu_);
  return activity_;
}

PipelinedFingerMap::Counters PipelinedFingerMap::counters() const {
  Counters c;
  c.first_runs = first_runs_.load(std::memory_order_relaxed);
  c.section_runs = section_runs_.load(std::memory_order_relaxed);
  c.first_deferrals = first_deferrals_.load(std::memory_order_relaxed);
  c.section_deferrals = section_deferrals_.load(std::memory_order_relaxed);
  c.recirculated = recirculated_.load(std::memory_order_relaxed);
  c.results_delivered = results_delivered_.load(std::memory_order_relaxed);
  for (std::size_t i = 0; i < c.invariant_violations.size(); ++i)
    c.invariant_violations[i] = violations_[i].load(std::memory_order_relaxed);
  return c;
}

}  // namespace fingers
