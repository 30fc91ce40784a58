#include "fingers/segment.hpp"

#include <algorithm>
#include <sstream>

namespace fingers {

SegmentedMap::SegmentedMap() {
  chain_[0][0] = std::make_unique<Segment>();
  chain_[1][0] = std::make_unique<Segment>();
  len_[0].store(1, std::memory_order_release);
  len_[1].store(1, std::memory_order_release);
}

std::uint64_t SegmentedMap::total_size() const {
  std::uint64_t n = 0;
  for (int side = 0; side < 2; ++side)
    for (int level = 0; level < chain_length(side); ++level)
      n += segment(side, level).live_size();
  return n;
}

Segment& SegmentedMap::append_segment(int side) {
  int len = chain_length(side);
  if (len >= kMaxChainLevels) throw StructureError("chain capacity exceeded");
  chain_[side][len] = std::make_unique<Segment>();
  len_[side].store(len + 1, std::memory_order_release);
  charge_nodes(1);
  return *chain_[side][len];
}

void SegmentedMap::remove_last_segment(int side) {
  int len = chain_length(side);
  if (len <= 1) throw StructureError("cannot remove level-0 segment");
  if (!chain_[side][len - 1]->empty()) throw StructureError("removing nonempty segment");
  len_[side].store(len - 1, std::memory_order_release);
  chain_[side][len - 1].reset();
  charge_nodes(1);
}

std::optional<Placement> SegmentedMap::locate(Key key, int max_level_exclusive) const {
  int top = top_level();
  int probe_top = std::min(top, max_level_exclusive - 1);
  for (int level = 0; level <= probe_top; ++level) {
    if (has_segment(0, level) && !segment(0, level).empty()) {
      charge_cmp(1);
      if (key <= segment(0, level).hi) return Placement{0, level};
    }
    if (has_segment(1, level) && !segment(1, level).empty()) {
      charge_cmp(1);
      if (key >= segment(1, level).lo) return Placement{1, level};
    }
  }
  if (top < max_level_exclusive) return Placement{0, last_level(0)};  // middle keys
  return std::nullopt;
}

void SegmentedMap::shift_up(int side, int level, std::uint64_t count) {
  if (count == 0) return;
  Segment& from = segment(side, level);
  Segment& to = segment(side, level + 1);
  if (count > from.live_size()) throw StructureError("shift_up exceeds donor size");
  if (side == 0) {
    // Donor keeps its smallest items; the largest move up and become the
    // low end of the next level.
    BPMap keep = from.store.split_at_rank(from.live_size() - count);
    BPMap moved = std::move(from.store);
    from.store = std::move(keep);
    moved.join_maps(std::move(to.store));
    to.store = std::move(moved);
  } else {
    // Mirror image: donor keeps its largest items; the smallest move up and
    // become the high end of the next level.
    BPMap moved = from.store.split_at_rank(count);
    to.store.join_maps(std::move(moved));
  }
  from.refresh_bounds();
  to.refresh_bounds();
}

void SegmentedMap::shift_down(int side, int level, std::uint64_t count) {
  if (count == 0) return;
  Segment& from = segment(side, level + 1);
  Segment& to = segment(side, level);
  if (count > from.live_size()) throw StructureError("shift_down exceeds donor size");
  if (side == 0) {
    BPMap moved = from.store.split_at_rank(count);
    to.store.join_maps(std::move(moved));
  } else {
    BPMap keep = from.store.split_at_rank(from.live_size() - count);
    BPMap moved = std::move(from.store);
    from.store = std::move(keep);
    moved.join_maps(std::move(to.store));
    to.store = std::move(moved);
  }
  from.refresh_bounds();
  to.refresh_bounds();
}

void SegmentedMap::cross_shift(int from_side, int from_level, int to_level, std::uint64_t count) {
  if (count == 0) return;
  Segment& from = segment(from_side, from_level);
  Segment& to = segment(1 - from_side, to_level);
  if (count > from.live_size()) throw StructureError("cross_shift exceeds donor size");
  if (from_side == 0) {
    // The front chain's items nearest the middle are its largest.
    BPMap keep = from.store.split_at_rank(from.live_size() - count);
    BPMap moved = std::move(from.store);
    from.store = std::move(keep);
    moved.join_maps(std::move(to.store));
    to.store = std::move(moved);
  } else {
    BPMap moved = from.store.split_at_rank(count);
    to.store.join_maps(std::move(moved));
  }
  from.refresh_bounds();
  to.refresh_bounds();
}

void SegmentedMap::move_across(int from_side, int to_side, int level) {
  Segment& from = segment(from_side, level);
  Segment& to = segment(to_side, level);
  if (!to.empty()) throw StructureError("move_across target not empty");
  to.store = std::move(from.store);
  from.store = BPMap();
  from.refresh_bounds();
  to.refresh_bounds();
  charge_nodes(1);
}

int SegmentedMap::trim_empty_tail(int side) {
  int removed = 0;
  while (chain_length(side) > 1 && segment(side, last_level(side)).empty()) {
    remove_last_segment(side);
    ++removed;
  }
  return removed;
}

int SegmentedMap::fill_below(int side, int level) {
  int first_underfull = -1;
  for (int j = 0; j < level; ++j) {
    if (segment_underfull(side, j)) {
      first_underfull = j;
      break;
    }
  }
  if (first_underfull < 0) return 0;

  for (int j = level - 1; j >= first_underfull; --j) {
    std::uint64_t need = 0, have = 0;
    for (int a = first_underfull; a <= j; ++a) {
      need += target_size(a);
      have += segment(side, a).live_size();
    }
    if (have < need) {
      std::uint64_t take = std::min(need - have, segment(side, j + 1).live_size());
      shift_down(side, j, take);
    }
  }
  return trim_empty_tail(side);
}

void SegmentedMap::rebalance_sweep(int side, const SweepOptions& opts) {
  int k = 0;
  while (k < chain_length(side) && k < opts.level_limit) {
    if (k > 0 && segment_overfull(side, k - 1)) {
      std::uint64_t sz = segment(side, k - 1).live_size();
      shift_up(side, k - 1, sz - target_size(k - 1));
    }
    if (k > 0 && segment_underfull(side, k - 1) &&
        (segment(side, k).live_size() >= slack(k) / 2 || is_last(side, k))) {
      int before = chain_length(side);
      fill_below(side, k);
      for (int lvl = before - 1; lvl >= chain_length(side); --lvl)
        if (opts.on_remove) opts.on_remove(side, lvl);
      if (k >= chain_length(side)) break;  // reservoir drained away
    }
    if (is_last(side, k) && segment_overfull(side, k) && k + 1 <= opts.level_limit &&
        (!opts.may_create || opts.may_create(side, k + 1))) {
      append_segment(side);
      if (opts.on_create) opts.on_create(side, k + 1);
      // The next iteration's overfull step resets this segment to target
      // (unless the new level sits at the limit, where the next stage owns
      // the pull).
    }
    if (opts.exec_skipped && segment_balanced(side, k) && opts.exec_skipped(k)) {
      // Execution never reached this section, so the rest of its slab needs
      // no rebalancing; jump to the next slab if one exists.
      if (k < opts.slab_boundary && opts.slab_boundary < chain_length(side) &&
          opts.slab_boundary < opts.level_limit) {
        k = opts.slab_boundary;
        continue;
      }
      break;
    }
    ++k;
  }
}

void SegmentedMap::rebalance_chains(const SweepOptions& opts, int max_iterations) {
  int iterations = 0;
  while (chain_length(0) != chain_length(1)) {
    if (++iterations > max_iterations)
      throw StructureError("chain rebalancing did not converge");
    int longer = chain_length(0) > chain_length(1) ? 0 : 1;
    int shorter = 1 - longer;
    int k = last_level(longer);
    for (int lvl = chain_length(shorter); lvl <= k; ++lvl) {
      append_segment(shorter);
      if (opts.on_create) opts.on_create(shorter, lvl);
    }
    move_across(longer, shorter, k);
    int before = chain_length(shorter);
    fill_below(shorter, k);
    for (int lvl = before - 1; lvl >= chain_length(shorter); --lvl)
      if (opts.on_remove) opts.on_remove(shorter, lvl);
    bool receiver_kept = chain_length(shorter) > k && !segment(shorter, k).empty();
    if (!receiver_kept) {
      // The moved items were consumed by the refill; drop the (empty) old
      // last segment of the longer chain too.
      if (chain_length(shorter) > k) {
        remove_last_segment(shorter);
        if (opts.on_remove) opts.on_remove(shorter, k);
      }
      remove_last_segment(longer);
      if (opts.on_remove) opts.on_remove(longer, k);
    }
  }
}

void SegmentedMap::cascade_fix(int side, int level) {
  int k = level;
  while (k < chain_length(side)) {
    std::uint64_t sz = segment(side, k).live_size();
    if (size_overfull(sz, k)) {
      if (is_last(side, k)) append_segment(side);
      shift_up(side, k, sz - target_size(k));
      ++k;
      continue;
    }
    if (size_underfull(sz, k, is_last(side, k))) {
      std::uint64_t want = target_size(k) - sz;
      std::uint64_t take = std::min(want, segment(side, k + 1).live_size());
      shift_down(side, k, take);
      if (segment(side, k + 1).empty() && is_last(side, k + 1)) {
        remove_last_segment(side);
        break;  // this segment is now last, hence balanced
      }
      if (take < want) break;  // upstream exhausted; stop the cascade
      ++k;
      continue;
    }
    break;
  }
}

void SegmentedMap::chain_fix_sequential() {
  int diff = chain_length(0) - chain_length(1);
  if (diff == 0) return;
  if (diff != 1 && diff != -1)
    throw StructureError("chain lengths diverged by more than one");
  int longer = diff > 0 ? 0 : 1;
  int shorter = 1 - longer;
  int lp = last_level(longer);
  int l = last_level(shorter);
  std::uint64_t have = segment(shorter, l).live_size();
  std::uint64_t want = target_size(l);
  if (have < want) {
    std::uint64_t take = std::min(want - have, segment(longer, lp).live_size());
    cross_shift(longer, lp, l, take);
    if (segment(shorter, l).live_size() < want) {
      // Donor drained without reaching target: drop the emptied segment.
      remove_last_segment(longer);
      return;
    }
  }
  append_segment(shorter);
}

std::vector<std::pair<Key, Value>> SegmentedMap::contents() const {
  std::vector<std::pair<Key, Value>> out;
  out.reserve(total_size());
  for_each([&](Key k, Value v) { out.emplace_back(k, v); });
  return out;
}

void SegmentedMap::for_each(const std::function<void(Key, Value)>& fn) const {
  for (int level = 0; level < chain_length(0); ++level)
    segment(0, level).store.for_each(fn);
  for (int level = chain_length(1) - 1; level >= 0; --level)
    segment(1, level).store.for_each(fn);
}

void SegmentedMap::publish_all() {
  for (int side = 0; side < 2; ++side)
    for (int level = 0; level < chain_length(side); ++level)
      segment(side, level).publish_size();
}

std::vector<std::string> SegmentedMap::check_invariants(bool strict_balance) const {
  std::vector<std::string> problems;
  auto complain = [&](const std::string& msg) { problems.push_back(msg); };

  for (int side = 0; side < 2; ++side) {
    if (chain_length(side) < 1) complain("chain " + std::to_string(side) + " is empty");
    std::optional<Key> prev_edge;  // middle-facing edge of the previous level
    for (int level = 0; level < chain_length(side); ++level) {
      const Segment& seg = segment(side, level);
      std::string where =
          "S" + std::to_string(side) + "[" + std::to_string(level) + "]";
      if (!seg.store.check_structure()) complain(where + ": corrupt tree");
      if (!seg.empty()) {
        if (seg.lo != seg.store.min_key() || seg.hi != seg.store.max_key())
          complain(where + ": cached bounds stale");
        // Levels move away from the finger: side 0 ascends, side 1 descends.
        if (prev_edge) {
          if (side == 0 && seg.lo <= *prev_edge)
            complain(where + ": overlaps previous level");
          if (side == 1 && seg.hi >= *prev_edge)
            complain(where + ": overlaps previous level");
        }
        prev_edge = (side == 0) ? seg.hi : seg.lo;
      } else if (level != last_level(side) && strict_balance) {
        complain(where + ": empty non-last segment");
      }
      if (strict_balance && !segment_balanced(side, level))
        complain(where + ": imbalanced (size " + std::to_string(seg.live_size()) + ")");
    }
  }
  // Every front-chain key precedes every back-chain key.
  std::optional<Key> front_max, back_min;
  for (int level = chain_length(0) - 1; level >= 0; --level)
    if (!segment(0, level).empty()) {
      front_max = segment(0, level).hi;
      break;
    }
  for (int level = chain_length(1) - 1; level >= 0; --level)
    if (!segment(1, level).empty()) {
      back_min = segment(1, level).lo;
      break;
    }
  if (front_max && back_min && *front_max >= *back_min)
    complain("front chain overlaps back chain");
  if (strict_balance && chain_length(0) != chain_length(1))
    complain("chain lengths differ (" + std::to_string(chain_length(0)) + " vs " +
             std::to_string(chain_length(1)) + ")");
  return problems;
}

std::vector<SegmentedMap::LevelInfo> SegmentedMap::level_info() const {
  std::vector<LevelInfo> out;
  for (int side = 0; side < 2; ++side)
    for (int level = 0; level < chain_length(side); ++level)
      out.push_back({side, level, segment(side, level).live_size(), is_last(side, level),
                     segment_balanced(side, level)});
  return out;
}

}  // namespace fingers
