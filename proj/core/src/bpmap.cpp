#include "fingers/bpmap.hpp"

#include <stdexcept>

namespace fingers {

void BPMap::destroy(Node* n) {
  if (!n) return;
  destroy(n->left);
  destroy(n->right);
  delete n;
}

BPMap::Node* BPMap::mk(Node* l, Key k, Value v, Node* r) {
  Node* n = new Node;
  n->key = k;
  n->value = v;
  n->left = l;
  n->right = r;
  return fix(n);
}

BPMap::Node* BPMap::fix(Node* n) {
  n->height = 1 + static_cast<std::uint32_t>(std::max(hgt(n->left), hgt(n->right)));
  n->size = 1 + sz(n->left) + sz(n->right);
  charge_nodes(1);
  return n;
}

BPMap::Node* BPMap::rotate_left(Node* n) {
  Node* r = n->right;
  n->right = r->left;
  r->left = n;
  fix(n);
  return fix(r);
}

BPMap::Node* BPMap::rotate_right(Node* n) {
  Node* l = n->left;
  n->left = l->right;
  l->right = n;
  fix(n);
  return fix(l);
}

BPMap::Node* BPMap::rebalance(Node* n) {
  fix(n);
  std::int64_t bal = hgt(n->left) - hgt(n->right);
  if (bal > 1) {
    if (hgt(n->left->left) < hgt(n->left->right)) n->left = rotate_left(n->left);
    return rotate_right(n);
  }
  if (bal < -1) {
    if (hgt(n->right->right) < hgt(n->right->left)) n->right = rotate_right(n->right);
    return rotate_left(n);
  }
  return n;
}

BPMap::Node* BPMap::join(Node* l, Node* mid, Node* r) {
  if (hgt(l) > hgt(r) + 1) {
    l->right = join(l->right, mid, r);
    return rebalance(l);
  }
  if (hgt(r) > hgt(l) + 1) {
    r->left = join(l, mid, r->left);
    return rebalance(r);
  }
  mid->left = l;
  mid->right = r;
  return fix(mid);
}

BPMap::Node* BPMap::join2(Node* l, Node* r) {
  if (!l) return r;
  if (!r) return l;
  Node* last = nullptr;
  l = split_last(l, &last);
  return join(l, last, r);
}

BPMap::Node* BPMap::split_last(Node* n, Node** out_last) {
  charge_nodes(1);
  if (!n->right) {
    *out_last = n;
    Node* l = n->left;
    n->left = nullptr;
    return l;
  }
  n->right = split_last(n->right, out_last);
  return rebalance(n);
}

BPMap::Node* BPMap::split_first(Node* n, Node** out_first) {
  charge_nodes(1);
  if (!n->left) {
    *out_first = n;
    Node* r = n->right;
    n->right = nullptr;
    return r;
  }
  n->left = split_first(n->left, out_first);
  return rebalance(n);
}

BPMap::Node* BPMap::split_rank(Node* n, std::uint64_t rank, Node** out_high) {
  if (!n) {
    *out_high = nullptr;
    return nullptr;
  }
  if (rank == 0) {
    *out_high = n;
    return nullptr;
  }
  if (rank == n->size) {
    *out_high = nullptr;
    return n;
  }
  charge_nodes(1);
  Node *l = n->left, *r = n->right;
  n->left = nullptr;
  n->right = nullptr;
  std::uint64_t left_size = sz(l);
  if (rank <= left_size) {
    Node* hi = nullptr;
    Node* lo = split_rank(l, rank, &hi);
    *out_high = join(hi, n, r);
    return lo;
  }
  Node* hi = nullptr;
  Node* lo = split_rank(r, rank - left_size - 1, &hi);
  *out_high = hi;
  return join(l, n, lo);
}

BPMap::Node* BPMap::build_sorted(const std::vector<std::pair<Key, Value>>& kv, std::size_t lo,
                                 std::size_t hi) {
  if (lo >= hi) return nullptr;
  std::size_t mid = lo + (hi - lo) / 2;
  Node* l = build_sorted(kv, lo, mid);
  Node* r = build_sorted(kv, mid + 1, hi);
  return mk(l, kv[mid].first, kv[mid].second, r);
}

Key BPMap::min_key() const {
  if (!root_) throw std::out_of_range("BPMap::min_key on empty map");
  const Node* n = root_;
  while (n->left) {
    charge_nodes(1);
    n = n->left;
  }
  return n->key;
}

Key BPMap::max_key() const {
  if (!root_) throw std::out_of_range("BPMap::max_key on empty map");
  const Node* n = root_;
  while (n->right) {
    charge_nodes(1);
    n = n->right;
  }
  return n->key;
}

std::optional<Value> BPMap::find(Key k) const {
  const Node* n = root_;
  while (n) {
    charge_cmp(1);
    if (k < n->key) {
      n = n->left;
    } else if (k > n->key) {
      n = n->right;
    } else {
      return n->value;
    }
  }
  return std::nullopt;
}

std::vector<std::optional<Value>> BPMap::unsorted_batch_search(
    const std::vector<Key>& keys) const {
  std::vector<std::optional<Value>> out;
  out.reserve(keys.size());
  for (Key k : keys) out.push_back(find(k));
  return out;
}

std::uint64_t BPMap::rank_lt(Key k) const {
  std::uint64_t r = 0;
  const Node* n = root_;
  while (n) {
    charge_nodes(1);
    charge_cmp(1);
    if (n->key < k) {
      r += sz(n->left) + 1;
      n = n->right;
    } else {
      n = n->left;
    }
  }
  return r;
}

std::uint64_t BPMap::rank_le(Key k) const {
  std::uint64_t r = 0;
  const Node* n = root_;
  while (n) {
    charge_nodes(1);
    charge_cmp(1);
    if (k < n->key) {
      n = n->left;
    } else {
      r += sz(n->left) + 1;
      n = n->right;
    }
  }
  return r;
}

BPMap BPMap::split_at_rank(std::uint64_t rank) {
  if (rank > size()) throw std::out_of_range("BPMap::split_at_rank past end");
  Node* high = nullptr;
  Node* low = split_rank(root_, rank, &high);
  root_ = high;
  BPMap out;
  out.root_ = low;
  return out;
}

void BPMap::join_maps(BPMap&& high) {
  if (high.empty()) return;
  if (!empty() && max_key() >= high.min_key()) {
    throw std::invalid_argument("BPMap::join_maps ranges overlap");
  }
  root_ = join2(root_, high.root_);
  high.root_ = nullptr;
}

void BPMap::insert_one(Key k, Value v) {
  struct One {
    Key key;
  };
  Batch<One> b{One{k}};
  sorted_batch_access(
      b, [](const One& o) { return o.key; },
      [&](const One&, bool found, Value& cur) {
        if (found) {
          cur = v;
          return MapAction::kNone;
        }
        return MapAction::kInsert;
      },
      [&](const One&) { return v; });
}

std::optional<Value> BPMap::erase_one(Key k) {
  std::optional<Value> old;
  struct One {
    Key key;
  };
  Batch<One> b{One{k}};
  sorted_batch_access(
      b, [](const One& o) { return o.key; },
      [&](const One&, bool found, Value& cur) {
        if (found) {
          old = cur;
          return MapAction::kErase;
        }
        return MapAction::kNone;
      },
      [](const One&) { return Value{}; });
  return old;
}

std::vector<std::pair<Key, Value>> BPMap::to_vector() const {
  std::vector<std::pair<Key, Value>> out;
  out.reserve(size());
  for_each([&](Key k, Value v) { out.emplace_back(k, v); });
  return out;
}

bool BPMap::check_structure() const {
  std::function<bool(const Node*, const Key*, const Key*)> rec =
      [&](const Node* n, const Key* lo, const Key* hi) -> bool {
    if (!n) return true;
    if (lo && !(*lo < n->key)) return false;
    if (hi && !(n->key < *hi)) return false;
    if (n->size != 1 + sz(n->left) + sz(n->right)) return false;
    std::int64_t bal = hgt(n->left) - hgt(n->right);
    if (bal < -1 || bal > 1) return false;
    if (n->height != 1 + static_cast<std::uint32_t>(std::max(hgt(n->left), hgt(n->right)))) {
      return false;
    }
    return rec(n->left, lo, &n->key) && rec(n->right, &n->key, hi);
  };
  return rec(root_, nullptr, nullptr);
}

}  // namespace fingers
