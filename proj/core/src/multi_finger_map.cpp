#include "fingers/multi_finger_map.hpp"

#include <algorithm>
#include <latch>
#include <stdexcept>
#include <utility>

namespace fingers {

MultiFingerMap::MultiFingerMap(std::vector<Key> finger_keys, CostLedger* ledger, Executor* exec)
    : ledger_(ledger), exec_(exec) {
  if (!std::is_sorted(finger_keys.begin(), finger_keys.end()))
    throw std::invalid_argument("finger keys must be ascending");
  fingers_.reserve(finger_keys.size());
  for (Key k : finger_keys) fingers_.push_back(FingerPos{k, true});
  for (std::size_t i = 0; i <= finger_keys.size(); ++i)
    sectors_.push_back(std::make_unique<BatchFingerMap>(ledger));
  lin_taken_.assign(sectors_.size(), 0);
}

int MultiFingerMap::sector_of(Key key) const {
  int lo = 0, hi = finger_count();
  while (lo < hi) {
    int mid = lo + (hi - lo) / 2;
    if (item_right_of(fingers_[static_cast<std::size_t>(mid)], key)) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return lo;
}

std::uint64_t MultiFingerMap::left_count(const BPMap& m, const FingerPos& pos) {
  return pos.before ? m.rank_lt(pos.key) : m.rank_le(pos.key);
}

bool MultiFingerMap::move_finger(int index, Key key, bool before) {
  if (index < 0 || index >= finger_count())
    throw std::out_of_range("finger index out of range");
  LedgerScope ls(ledger_);
  bool ok = apply_move(index, FingerPos{key, before});
  ++(ok ? counters_.applied : counters_.rejected);
  return ok;
}

bool MultiFingerMap::apply_move(int index, FingerPos pos) {
  std::size_t i = static_cast<std::size_t>(index);
  FingerPos old = fingers_[i];
  if (old == pos) return true;
  if ((index > 0 && pos_less(pos, fingers_[i - 1])) ||
      (index + 1 < finger_count() && pos_less(fingers_[i + 1], pos))) {
    return false;
  }

  bool moving_right = pos_less(old, pos);
  // Moving right shrinks the right sector from its low end (its side-0
  // chain faces the finger); moving left shrinks the left sector from its
  // high end (side 1 faces the finger).
  SegmentedMap& donor =
      sectors_[moving_right ? i + 1 : i]->mutable_store();
  SegmentedMap& recv = sectors_[moving_right ? i : i + 1]->mutable_store();
  int d = moving_right ? 0 : 1;

  if (donor.total_size() > 0) {
    // The moved range covers whole near-chain levels 0..k_cut-1 plus a piece
    // of level k_cut; if no near-chain level retains an item the range
    // reaches into the far chain.
    int k_cut = -1;
    std::uint64_t moved_total = 0;
    for (int j = 0; j <= donor.last_level(d); ++j) {
      const Segment& seg = donor.segment(d, j);
      std::uint64_t left = left_count(seg.store, pos);
      std::uint64_t moving = (d == 0) ? left : seg.store.size() - left;
      moved_total += moving;
      if (moving < seg.store.size()) {
        k_cut = j;
        break;
      }
    }
    if (k_cut < 0) {
      transfer_far(donor, recv, moving_right, pos);
    } else if (moved_total > 0) {
      counters_.items_moved += moved_total;
      transfer_near(donor, recv, d, k_cut, pos);
    }
  }

  fingers_[i] = pos;
  return true;
}

void MultiFingerMap::transfer_near(SegmentedMap& donor, SegmentedMap& recv, int donor_side,
                                   int k_cut, const FingerPos& pos) {
  int d = donor_side;
  int r = 1 - d;
  int k = k_cut;

  // Cut the moved range out of the donor's near chain into one ascending
  // run: whole levels below k plus the facing piece of level k.
  BPMap run;
  if (d == 0) {
    for (int j = 0; j < k; ++j) {
      Segment& seg = donor.segment(0, j);
      BPMap whole = std::move(seg.store);
      seg.store = BPMap();
      run.join_maps(std::move(whole));
      seg.refresh_and_publish();
    }
    Segment& edge = donor.segment(0, k);
    std::uint64_t cut = left_count(edge.store, pos);
    if (cut > 0) {
      run.join_maps(edge.store.split_at_rank(cut));
      edge.refresh_and_publish();
    }
  } else {
    Segment& edge = donor.segment(1, k);
    std::uint64_t keep = left_count(edge.store, pos);
    if (keep < edge.store.size()) {
      BPMap kept = edge.store.split_at_rank(keep);
      BPMap moving = std::move(edge.store);
      edge.store = std::move(kept);
      run.join_maps(std::move(moving));
      edge.refresh_and_publish();
    }
    for (int j = k - 1; j >= 0; --j) {
      Segment& seg = donor.segment(1, j);
      BPMap whole = std::move(seg.store);
      seg.store = BPMap();
      run.join_maps(std::move(whole));
      seg.refresh_and_publish();
    }
  }

  // Join the receiver's facing levels 0..k into its level k+1 (or pool them
  // when its chain ends sooner), then refill 0..k-1 from the run to target
  // sizes, nearest level first; everything left lands in level k.
  int rl = recv.last_level(r);
  int pool_hi = std::min(k, rl);
  BPMap pool;
  if (r == 0) {
    for (int j = 0; j <= pool_hi; ++j) {
      Segment& seg = recv.segment(0, j);
      BPMap whole = std::move(seg.store);
      seg.store = BPMap();
      pool.join_maps(std::move(whole));
      seg.publish_size();
    }
  } else {
    for (int j = pool_hi; j >= 0; --j) {
      Segment& seg = recv.segment(1, j);
      BPMap whole = std::move(seg.store);
      seg.store = BPMap();
      pool.join_maps(std::move(whole));
      seg.publish_size();
    }
  }
  bool have_dest = rl > k;
  if (have_dest) {
    Segment& dest = recv.segment(r, k + 1);
    if (r == 1) {
      dest.store.join_maps(std::move(pool));
    } else {
      pool.join_maps(std::move(dest.store));
      dest.store = std::move(pool);
    }
    dest.refresh_and_publish();
    pool = BPMap();
  } else {
    while (recv.last_level(r) < k) recv.append_segment(r);
  }
  for (int j = 0; j < k && !run.empty(); ++j) {
    std::uint64_t take = std::min(target_size(j), run.size());
    Segment& seg = recv.segment(r, j);
    if (r == 0) {
      seg.store = run.split_at_rank(take);
    } else {
      BPMap low = run.split_at_rank(run.size() - take);
      seg.store = std::move(run);
      run = std::move(low);
    }
    seg.refresh_and_publish();
  }
  Segment& last = recv.segment(r, k);
  if (!have_dest && !pool.empty()) {
    if (r == 1) {
      pool.join_maps(std::move(run));
      last.store = std::move(pool);
    } else {
      run.join_maps(std::move(pool));
      last.store = std::move(run);
    }
  } else {
    last.store = std::move(run);
  }
  last.refresh_and_publish();

  rebalance_sector(donor);
  rebalance_sector(recv);
}

void MultiFingerMap::transfer_far(SegmentedMap& donor, SegmentedMap& recv, bool moving_right,
                                  const FingerPos& pos) {
  ++counters_.far_chain;
  BPMap donor_all;
  flatten(donor, donor_all);
  std::uint64_t lc = left_count(donor_all, pos);
  BPMap moved;
  if (moving_right) {
    moved = donor_all.split_at_rank(lc);
  } else {
    BPMap kept = donor_all.split_at_rank(lc);
    moved = std::move(donor_all);
    donor_all = std::move(kept);
  }
  counters_.items_moved += moved.size();

  BPMap recv_all;
  flatten(recv, recv_all);
  if (moving_right) {
    recv_all.join_maps(std::move(moved));
  } else {
    moved.join_maps(std::move(recv_all));
    recv_all = std::move(moved);
  }
  redistribute(donor, std::move(donor_all));
  redistribute(recv, std::move(recv_all));
}

void MultiFingerMap::rebalance_sector(SegmentedMap& s) {
  RebalanceScope rb;
  SegmentedMap::SweepOptions opts;
  s.rebalance_sweep(0, opts);
  s.rebalance_sweep(1, opts);
  s.rebalance_chains(opts, 4 * SegmentedMap::kMaxChainLevels);
  s.publish_all();
}

void MultiFingerMap::flatten(SegmentedMap& s, BPMap& out) {
  for (int j = 0; j <= s.last_level(0); ++j) {
    Segment& seg = s.segment(0, j);
    BPMap whole = std::move(seg.store);
    seg.store = BPMap();
    out.join_maps(std::move(whole));
  }
  for (int j = s.last_level(1); j >= 0; --j) {
    Segment& seg = s.segment(1, j);
    BPMap whole = std::move(seg.store);
    seg.store = BPMap();
    out.join_maps(std::move(whole));
  }
  while (s.chain_length(0) > 1) s.remove_last_segment(0);
  while (s.chain_length(1) > 1) s.remove_last_segment(1);
  s.segment(0, 0).publish_size();
  s.segment(1, 0).publish_size();
}

void MultiFingerMap::redistribute(SegmentedMap& s, BPMap all) {
  RebalanceScope rb;
  int k = 0;
  while (all.size() > 2 * (target_size(k) + slack(k))) {
    if (s.last_level(0) < k) s.append_segment(0);
    if (s.last_level(1) < k) s.append_segment(1);
    std::uint64_t t = target_size(k);
    s.segment(0, k).store = all.split_at_rank(t);
    BPMap low = all.split_at_rank(all.size() - t);
    s.segment(1, k).store = std::move(all);
    all = std::move(low);
    s.segment(0, k).refresh_and_publish();
    s.segment(1, k).refresh_and_publish();
    ++k;
  }
  if (s.last_level(0) < k) s.append_segment(0);
  if (s.last_level(1) < k) s.append_segment(1);
  std::uint64_t half = (all.size() + 1) / 2;
  s.segment(0, k).store = all.split_at_rank(half);
  s.segment(1, k).store = std::move(all);
  s.segment(0, k).refresh_and_publish();
  s.segment(1, k).refresh_and_publish();
}

void MultiFingerMap::process_batch(const std::vector<OpCall*>& calls) {
  if (calls.empty()) return;
  LedgerScope ls(ledger_);

  std::vector<OpCall*> moves;
  std::vector<OpCall*> rest;
  rest.reserve(calls.size());
  for (OpCall* c : calls)
    (c->op.type == OpType::kFingerMove ? moves : rest).push_back(c);

  if (!moves.empty()) {
    auto record_move = [&](OpCall* c) {
      lin_.push_back(LinRecord{c->op.id, OpType::kFingerMove, c->op.key,
                               static_cast<Value>(c->op.finger), c->result, c->op.before});
    };
    // Bad-index moves take no effect; record them first in batch order.
    std::vector<std::vector<OpCall*>> per_finger(static_cast<std::size_t>(finger_count()));
    for (OpCall* c : moves) {
      std::uint32_t idx = c->op.finger;
      if (idx >= per_finger.size()) {
        c->result = OpResult{false, 0, true};
        c->complete();
        record_move(c);
      } else {
        per_finger[idx].push_back(c);
      }
    }
    // Per finger, in index order: members report as if moved one after the
    // other (a move crossing a neighboring finger is rejected and leaves the
    // position alone), but only the net movement transfers items.
    for (int i = 0; i < finger_count(); ++i) {
      auto& members = per_finger[static_cast<std::size_t>(i)];
      if (members.empty()) continue;
      FingerPos net = fingers_[static_cast<std::size_t>(i)];
      for (OpCall* c : members) {
        FingerPos want{c->op.key, c->op.before};
        bool ok = !((i > 0 && pos_less(want, fingers_[static_cast<std::size_t>(i - 1)])) ||
                    (i + 1 < finger_count() &&
                     pos_less(fingers_[static_cast<std::size_t>(i + 1)], want)));
        if (ok) net = want;
        ++(ok ? counters_.applied : counters_.rejected);
        c->result = OpResult{ok, 0, !ok};
        c->complete();
        record_move(c);
      }
      OpScope os(members.back()->op.id);
      apply_move(i, net);
    }
  }

  if (!rest.empty()) {
    std::vector<std::vector<OpCall*>> per(sectors_.size());
    for (OpCall* c : rest)
      per[static_cast<std::size_t>(sector_of(c->op.key))].push_back(c);

    if (exec_ && !exec_->serial()) {
      std::ptrdiff_t live = 0;
      for (const auto& v : per)
        if (!v.empty()) ++live;
      if (live > 0) {
        std::latch done(live);
        for (std::size_t s = 0; s < per.size(); ++s) {
          if (per[s].empty()) continue;
          exec_->post([this, s, &per, &done] {
            sectors_[s]->process_batch(per[s]);
            done.count_down();
          });
        }
        done.wait();
      }
    } else {
      for (std::size_t s = 0; s < per.size(); ++s)
        if (!per[s].empty()) sectors_[s]->process_batch(per[s]);
    }
  }

  // Collect the sectors' new linearization records in sector (key) order.
  for (std::size_t s = 0; s < sectors_.size(); ++s) {
    const auto& sl = sectors_[s]->linearization();
    for (std::size_t i = lin_taken_[s]; i < sl.size(); ++i) lin_.push_back(sl[i]);
    lin_taken_[s] = sl.size();
  }
}

std::uint64_t MultiFingerMap::size() const {
  std::uint64_t n = 0;
  for (const auto& s : sectors_) n += s->size();
  return n;
}

std::vector<std::pair<Key, Value>> MultiFingerMap::contents() const {
  std::vector<std::pair<Key, Value>> out;
  for (const auto& s : sectors_) {
    auto part = s->contents();
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<std::string> MultiFingerMap::check_invariants() const {
  std::vector<std::string> out;
  for (std::size_t s = 0; s < sectors_.size(); ++s) {
    for (std::string& v : sectors_[s]->check_invariants())
      out.push_back("sector " + std::to_string(s) + ": " + v);
    sectors_[s]->store().for_each([&](Key k, Value) {
      if (sector_of(k) != static_cast<int>(s))
        out.push_back("sector " + std::to_string(s) + ": key " + std::to_string(k) +
                      " outside its finger range");
    });
  }
  return out;
}

}  // namespace fingers
