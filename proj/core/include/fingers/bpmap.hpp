#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "fingers/batch.hpp"
#include "fingers/ledger.hpp"
#include "fingers/types.hpp"

namespace fingers {

enum class MapAction : std::uint8_t { kNone, kInsert, kErase };

// Ordered map on a join-based AVL tree owned by exactly one writer. All
// bulk operations charge one unit per key comparison and per node touched,
// so counted work for a sorted batch of b distinct keys against n entries
// is O(b log n), and splits/joins are O(log n).
class BPMap {
 public:
  struct Node {
    Node* left = nullptr;
    Node* right = nullptr;
    Key key;
    Value value;
    std::uint32_t height = 1;
    std::uint64_t size = 1;
  };

  BPMap() = default;
  BPMap(BPMap&& o) noexcept : root_(o.root_) { o.root_ = nullptr; }
  BPMap& operator=(BPMap&& o) noexcept {
    if (this != &o) {
      destroy(root_);
      root_ = o.root_;
      o.root_ = nullptr;
    }
    return *this;
  }
  BPMap(const BPMap&) = delete;
  BPMap& operator=(const BPMap&) = delete;
  ~BPMap() { destroy(root_); }

  std::uint64_t size() const { return sz(root_); }
  bool empty() const { return root_ == nullptr; }

  // Smallest / largest key; O(log n) counted. Precondition: non-empty.
  Key min_key() const;
  Key max_key() const;

  std::optional<Value> find(Key k) const;

  // Unsorted batch of lookups, one independent descent per query.
  std::vector<std::optional<Value>> unsorted_batch_search(const std::vector<Key>& keys) const;

  // Number of entries with key strictly below / at most k; O(log n) counted.
  std::uint64_t rank_lt(Key k) const;
  std::uint64_t rank_le(Key k) const;

  // First `rank` entries split off into a new map; the rest stays.
  // Throws std::out_of_range when rank exceeds size().
  BPMap split_at_rank(std::uint64_t rank);

  // Concatenates `high` onto this map. Requires max_key() < high.min_key().
  void join_maps(BPMap&& high);

  // Applies a sorted batch of distinct-keyed elements. For each element the
  // visitor receives the match state and, when found, a mutable reference
  // to the stored value; its return decides the structural change:
  //   kNone   - leave presence as is (value may have been updated in place)
  //   kInsert - insert `insert_value(e)` (only when not found)
  //   kErase  - remove the entry (only when found)
  template <typename E, typename KeyOf, typename Visit, typename InsertValue>
  void sorted_batch_access(const Batch<E>& ops, KeyOf key_of, Visit visit,
                           InsertValue insert_value) {
    root_ = access(root_, ops, key_of, visit, insert_value);
  }

  void insert_one(Key k, Value v);
  std::optional<Value> erase_one(Key k);

  void for_each(const std::function<void(Key, Value)>& fn) const { visit_inorder(root_, fn); }
  std::vector<std::pair<Key, Value>> to_vector() const;

  // Debug: verifies AVL shape and key order.
  bool check_structure() const;

 private:
  static void visit_inorder(const Node* n, const std::function<void(Key, Value)>& fn) {
    if (!n) return;
    visit_inorder(n->left, fn);
    fn(n->key, n->value);
    visit_inorder(n->right, fn);
  }
  static std::uint64_t sz(const Node* n) { return n ? n->size : 0; }
  static std::int64_t hgt(const Node* n) { return n ? static_cast<std::int64_t>(n->height) : 0; }
  static void destroy(Node* n);
  static Node* mk(Node* l, Key k, Value v, Node* r);
  static Node* fix(Node* n);
  static Node* rotate_left(Node* n);
  static Node* rotate_right(Node* n);
  static Node* rebalance(Node* n);
  static Node* join(Node* l, Node* mid, Node* r);
  static Node* join2(Node* l, Node* r);
  static Node* split_last(Node* n, Node** out_last);
  static Node* split_first(Node* n, Node** out_first);
  static Node* split_rank(Node* n, std::uint64_t rank, Node** out_high);
  static Node* build_sorted(const std::vector<std::pair<Key, Value>>& kv, std::size_t lo,
                            std::size_t hi);

  template <typename E, typename KeyOf, typename Visit, typename InsertValue>
  static Node* access(Node* t, const Batch<E>& ops, KeyOf key_of, Visit visit,
                      InsertValue insert_value) {
    if (ops.empty()) return t;
    if (!t) {
      std::vector<std::pair<Key, Value>> ins;
      ops.for_each([&](const E& e) {
        Value tmp{};
        charge_cmp(1);
        if (visit(e, false, tmp) == MapAction::kInsert) {
          ins.emplace_back(key_of(e), insert_value(e));
        }
      });
      return build_sorted(ins, 0, ins.size());
    }
    charge_nodes(1);
    auto less = [](Key a, Key b) { return a < b; };
    auto kf = [&](const E& e) -> Key { return key_of(e); };
    auto [lt, rest] = BatchOps<E>::split_lt(ops, t->key, less, kf);
    auto [eq, gt] = BatchOps<E>::split_le(rest, t->key, less, kf);
    DepthScope d;
    Node* l = access(t->left, lt, key_of, visit, insert_value);
    Node* r = access(t->right, gt, key_of, visit, insert_value);
    t->left = nullptr;
    t->right = nullptr;
    if (eq.empty()) return join(l, t, r);
    charge_cmp(1);
    MapAction act = visit(eq.at(0), true, t->value);
    if (act == MapAction::kErase) {
      delete t;
      charge_nodes(1);
      return join2(l, r);
    }
    return join(l, t, r);
  }

  Node* root_ = nullptr;
};

}  // namespace fingers
