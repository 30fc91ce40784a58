#include "fingers/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fingers {

FingerOracle::FingerOracle(std::vector<Key> universe, std::vector<Key> finger_keys) {
  std::sort(universe.begin(), universe.end());
  universe.erase(std::unique(universe.begin(), universe.end()), universe.end());
  keys_ = std::move(universe);
  fen_.assign(keys_.size() + 1, 0);
  if (!std::is_sorted(finger_keys.begin(), finger_keys.end()) ||
      std::adjacent_find(finger_keys.begin(), finger_keys.end()) != finger_keys.end())
    throw std::invalid_argument("finger keys must be ascending");
  fingers_.reserve(finger_keys.size());
  for (Key k : finger_keys) fingers_.push_back(FingerPos{k, true});
}

std::uint64_t FingerOracle::fenwick_prefix(std::size_t count) const {
  std::uint64_t s = 0;
  for (std::size_t i = count; i > 0; i -= i & (~i + 1)) s += fen_[i];
  return s;
}

void FingerOracle::fenwick_add(std::size_t idx, std::int64_t delta) {
  for (std::size_t i = idx + 1; i < fen_.size(); i += i & (~i + 1))
    fen_[i] = static_cast<std::uint64_t>(static_cast<std::int64_t>(fen_[i]) + delta);
}

std::uint64_t FingerOracle::rank_lt(Key k) const {
  std::size_t c = static_cast<std::size_t>(
      std::lower_bound(keys_.begin(), keys_.end(), k) - keys_.begin());
  return fenwick_prefix(c);
}

std::uint64_t FingerOracle::rank_le(Key k) const {
  std::size_t c = static_cast<std::size_t>(
      std::upper_bound(keys_.begin(), keys_.end(), k) - keys_.begin());
  return fenwick_prefix(c);
}

std::uint64_t FingerOracle::left_count(const FingerPos& p) const {
  return p.before ? rank_lt(p.key) : rank_le(p.key);
}

std::uint64_t FingerOracle::distance(Key k) const {
  std::uint64_t n = present_;
  std::uint64_t lt = rank_lt(k);
  bool present = map_.count(k) > 0;
  std::uint64_t idx = lt + 1;  // 1-based position, or the insertion rank
  std::uint64_t r = std::min(idx, present ? n - idx + 1 : n - lt + 1);
  for (const FingerPos& f : fingers_) {
    std::uint64_t fl = left_count(f);
    std::uint64_t d;
    if (item_right_of(f, k)) {
      d = lt + 1 - fl;  // items in (finger, k], counting k itself
    } else {
      d = fl - lt + (present ? 0 : 1);  // items in [k, finger)
    }
    r = std::min(r, d);
  }
  return std::max<std::uint64_t>(r, 1);
}

FingerOracle::Applied FingerOracle::apply(const Operation& op) {
  Applied out;
  if (op.type == OpType::kFingerMove) {
    std::size_t idx = op.finger;
    if (idx >= fingers_.size()) {
      out.result = OpResult{false, 0, true};
      out.r = 1;
    } else {
      FingerPos want{op.key, op.before};
      bool ok = !((idx > 0 && pos_less(want, fingers_[idx - 1])) ||
                  (idx + 1 < fingers_.size() && pos_less(fingers_[idx + 1], want)));
      std::uint64_t moved = 0;
      if (ok) {
        std::uint64_t a = left_count(fingers_[idx]);
        std::uint64_t b = left_count(want);
        moved = a < b ? b - a : a - b;
        fingers_[idx] = want;
      }
      out.result = OpResult{ok, 0, !ok};
      out.r = std::max<std::uint64_t>(moved, 1);
    }
  } else {
    out.r = distance(op.key);
    auto it = map_.find(op.key);
    bool present = it != map_.end();
    out.result = OpResult{present, present ? it->second : 0, false};
    switch (op.type) {
      case OpType::kSearch:
        break;
      case OpType::kUpdate:
        if (present) it->second = op.value;
        break;
      case OpType::kInsert:
        if (present) {
          it->second = op.value;
        } else {
          std::size_t slot = static_cast<std::size_t>(
              std::lower_bound(keys_.begin(), keys_.end(), op.key) - keys_.begin());
          if (slot >= keys_.size() || keys_[slot] != op.key)
            throw std::invalid_argument("oracle: key outside declared universe");
          map_.emplace(op.key, op.value);
          fenwick_add(slot, 1);
          ++present_;
        }
        break;
      case OpType::kDelete:
        if (present) {
          std::size_t slot = static_cast<std::size_t>(
              std::lower_bound(keys_.begin(), keys_.end(), op.key) - keys_.begin());
          map_.erase(it);
          fenwick_add(slot, -1);
          --present_;
        }
        break;
      case OpType::kFingerMove:
        break;
    }
  }
  out.charge = std::log2(static_cast<double>(out.r)) + 1.0;
  f_total_ += out.charge;
  return out;
}

namespace {

std::string describe(const OpResult& r) {
  return "{found=" + std::to_string(r.found) + ", value=" + std::to_string(r.value) +
         ", rejected=" + std::to_string(r.rejected) + "}";
}

}  // namespace

VerifyResult verify_linearization(const std::vector<LinRecord>& lin,
                                  std::vector<Key> finger_keys) {
  std::vector<Key> universe;
  universe.reserve(lin.size());
  for (const LinRecord& r : lin)
    if (r.type != OpType::kFingerMove) universe.push_back(r.key);
  FingerOracle oracle(std::move(universe), std::move(finger_keys));

  VerifyResult out;
  for (const LinRecord& rec : lin) {
    Operation op;
    op.type = rec.type;
    op.key = rec.key;
    op.id = rec.op_id;
    if (rec.type == OpType::kFingerMove) {
      op.finger = static_cast<std::uint32_t>(rec.value);
      op.before = rec.before;
    } else {
      op.value = rec.value;
    }
    FingerOracle::Applied applied = oracle.apply(op);
    ++out.checked;
    if (!(applied.result == rec.result)) {
      out.ok = false;
      out.first_mismatch_op_id = rec.op_id;
      out.detail = "op " + std::to_string(rec.op_id) + " (" + op_type_name(rec.type) + " " +
                   std::to_string(rec.key) + "): recorded " + describe(rec.result) +
                   ", reference " + describe(applied.result);
      break;
    }
  }
  out.f_total = oracle.f_total();
  return out;
}

}  // namespace fingers
