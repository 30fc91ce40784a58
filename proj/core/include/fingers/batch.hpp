#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fingers/ledger.hpp"
#include "fingers/types.hpp"

namespace fingers {

// Immutable leaf-based height-balanced binary tree. Items live at leaves;
// each internal node caches its subtree's rightmost item so a sorted batch
// supports key splits in O(log n) counted node touches. Split and join are
// logarithmic, structural sharing makes copies free.
template <typename T>
class Batch {
 public:
  struct Node {
    std::shared_ptr<const Node> left;
    std::shared_ptr<const Node> right;
    T item;  // leaf: the element; internal: rightmost item of the subtree
    std::uint64_t size;
    std::uint32_t height;
    bool leaf() const { return !left; }
  };
  using NodePtr = std::shared_ptr<const Node>;

  Batch() = default;
  explicit Batch(NodePtr root) : root_(std::move(root)) {}
  Batch(std::initializer_list<T> items) : Batch(from_items(items.begin(), items.end())) {}

  static Batch single(T item) { return Batch(make_leaf(std::move(item))); }

  template <typename It>
  static Batch from_items(It first, It last) {
    std::vector<T> v(first, last);
    return Batch(build(v.data(), v.size()));
  }
  static Batch from_vector(const std::vector<T>& v) { return Batch(build(v.data(), v.size())); }

  std::uint64_t size() const { return root_ ? root_->size : 0; }
  bool empty() const { return !root_; }
  std::uint32_t height() const { return root_ ? root_->height : 0; }
  const NodePtr& root() const { return root_; }

  // Rightmost item; O(1).
  const T& last() const {
    require(!empty(), "last() on empty batch");
    return root_->item;
  }

  // i-th item, 0-based; O(log n).
  const T& at(std::uint64_t i) const {
    if (i >= size()) throw std::out_of_range("Batch::at");
    const Node* n = root_.get();
    while (!n->leaf()) {
      charge_nodes(1);
      if (i < n->left->size) {
        n = n->left.get();
      } else {
        i -= n->left->size;
        n = n->right.get();
      }
    }
    return n->item;
  }

  // First `pos` items and the rest.
  std::pair<Batch, Batch> split(std::uint64_t pos) const {
    if (pos > size()) throw std::out_of_range("Batch::split position past end");
    auto [l, r] = split_node(root_, pos);
    return {Batch(std::move(l)), Batch(std::move(r))};
  }

  // Concatenation preserving order; O(|height difference|) new nodes.
  static Batch join2(const Batch& a, const Batch& b) {
    return Batch(join_node(a.root_, b.root_));
  }

  // Joins many parts in order via pairwise reduction: O(total) work,
  // logarithmic instrumented depth.
  static Batch join(const std::vector<Batch>& parts) {
    return Batch(join_many(parts.data(), parts.size()));
  }

  void for_each(const std::function<void(const T&)>& fn) const { visit(root_.get(), fn); }

  std::vector<T> to_vector() const {
    std::vector<T> out;
    out.reserve(size());
    for_each([&](const T& x) { out.push_back(x); });
    return out;
  }

 private:
  template <typename U>
  friend struct BatchOps;

  static void require(bool ok, const char* msg) {
    if (!ok) throw std::out_of_range(msg);
  }

  static NodePtr make_leaf(T item) {
    charge_nodes(1);
    auto n = std::make_shared<Node>();
    n->item = std::move(item);
    n->size = 1;
    n->height = 0;
    return n;
  }

  static NodePtr make(NodePtr l, NodePtr r) {
    charge_nodes(1);
    auto n = std::make_shared<Node>();
    n->size = l->size + r->size;
    n->height = 1 + std::max(l->height, r->height);
    n->item = r->item;
    n->left = std::move(l);
    n->right = std::move(r);
    return n;
  }

  static std::int64_t hgt(const NodePtr& n) { return n ? static_cast<std::int64_t>(n->height) : -1; }

  // Builds a node from two subtrees whose heights differ by at most two,
  // restoring balance with single or double rotations.
  static NodePtr balance2(NodePtr l, NodePtr r) {
    std::int64_t hl = hgt(l), hr = hgt(r);
    if (hl - hr <= 1 && hr - hl <= 1) return make(std::move(l), std::move(r));
    if (hl == hr + 2) {
      NodePtr ll = l->left, lr = l->right;
      if (hgt(ll) >= hgt(lr)) return make(ll, make(lr, std::move(r)));
      return make(make(ll, lr->left), make(lr->right, std::move(r)));
    }
    if (hr == hl + 2) {
      NodePtr rl = r->left, rr = r->right;
      if (hgt(rr) >= hgt(rl)) return make(make(std::move(l), rl), rr);
      return make(make(std::move(l), rl->left), make(rl->right, rr));
    }
    // Heights differ by more than two: callers must not let this happen.
    throw std::logic_error("Batch::balance2 height gap");
  }

  static NodePtr join_node(const NodePtr& a, const NodePtr& b) {
    if (!a) return b;
    if (!b) return a;
    std::int64_t ha = hgt(a), hb = hgt(b);
    if (ha - hb <= 1 && hb - ha <= 1) return make(a, b);
    if (ha > hb) {
      charge_nodes(1);
      return balance2(a->left, join_node(a->right, b));
    }
    charge_nodes(1);
    return balance2(join_node(a, b->left), b->right);
  }

  static NodePtr join_many(const Batch* parts, std::size_t n) {
    if (n == 0) return nullptr;
    if (n == 1) return parts[0].root_;
    DepthScope d;
    std::size_t half = n / 2;
    NodePtr l = join_many(parts, half);
    NodePtr r = join_many(parts + half, n - half);
    return join_node(l, r);
  }

  static std::pair<NodePtr, NodePtr> split_node(const NodePtr& n, std::uint64_t pos) {
    if (!n) return {nullptr, nullptr};
    if (pos == 0) return {nullptr, n};
    if (pos == n->size) return {n, nullptr};
    charge_nodes(1);
    if (pos <= n->left->size) {
      auto [a, b] = split_node(n->left, pos);
      return {std::move(a), join_node(b, n->right)};
    }
    auto [a, b] = split_node(n->right, pos - n->left->size);
    return {join_node(n->left, a), std::move(b)};
  }

  static NodePtr build(const T* data, std::uint64_t n) {
    if (n == 0) return nullptr;
    if (n == 1) return make_leaf(data[0]);
    std::uint64_t half = n / 2;
    DepthScope d;
    return make(build(data, half), build(data + half, n - half));
  }

  static void visit(const Node* n, const std::function<void(const T&)>& fn) {
    if (!n) return;
    if (n->leaf()) {
      fn(n->item);
      return;
    }
    visit(n->left.get(), fn);
    visit(n->right.get(), fn);
  }

  NodePtr root_;
};

// Order-respecting algorithms over sorted batches. `KeyLess` compares the
// projection of two items.
template <typename T>
struct BatchOps {
  using B = Batch<T>;

  // Number of leading items for which `pred` holds, assuming `pred` is
  // monotone (true on a prefix). O(log n).
  template <typename Pred>
  static std::uint64_t prefix_length(const B& b, Pred pred) {
    const typename B::Node* n = b.root().get();
    if (!n) return 0;
    std::uint64_t acc = 0;
    while (!n->leaf()) {
      charge_nodes(1);
      charge_cmp(1);
      if (pred(n->left->item)) {  // whole left subtree is in the prefix
        acc += n->left->size;
        n = n->right.get();
      } else {
        n = n->left.get();
      }
    }
    charge_cmp(1);
    if (pred(n->item)) ++acc;
    return acc;
  }

  // Splits a sorted batch into (items <= key, items > key).
  template <typename Less, typename KeyOf>
  static std::pair<B, B> split_le(const B& b, const Key& key, Less less, KeyOf key_of) {
    std::uint64_t pos = prefix_length(b, [&](const T& x) { return !less(key, key_of(x)); });
    return b.split(pos);
  }

  // Splits a sorted batch into (items < key, items >= key).
  template <typename Less, typename KeyOf>
  static std::pair<B, B> split_lt(const B& b, const Key& key, Less less, KeyOf key_of) {
    std::uint64_t pos = prefix_length(b, [&](const T& x) { return less(key_of(x), key); });
    return b.split(pos);
  }

  // Unsorted partition around a pivot predicate: (matching, rest), each in
  // input order. O(n) comparisons.
  template <typename Pred>
  static std::pair<B, B> partition_by(const B& b, Pred pred) {
    std::vector<T> yes, no;
    b.for_each([&](const T& x) {
      charge_cmp(1);
      if (pred(x)) {
        yes.push_back(x);
      } else {
        no.push_back(x);
      }
    });
    return {B::from_vector(yes), B::from_vector(no)};
  }

  // Partitions a sorted batch around sorted pivot keys into k+1 sorted
  // parts; items equal to a pivot land in the lower part. O(k log n) via
  // divide and conquer over the pivots.
  template <typename Less>
  static std::vector<B> partition_sorted(const B& b, const std::vector<Key>& pivots, Less less) {
    std::vector<B> out(pivots.size() + 1);
    partition_sorted_rec(b, pivots, 0, pivots.size(), out, less);
    return out;
  }

  // Merges two sorted batches. Without `combine`, the result is stable
  // (items of `a` precede equal items of `b`). With `combine`, both inputs
  // must be duplicate-free and colliding pairs collapse to
  // combine(a_item, b_item).
  template <typename Less, typename KeyOf>
  static B merge(const B& a, const B& b, Less less, KeyOf key_of) {
    return B(merge_rec(a.root(), b.root(), less, key_of));
  }

  template <typename Less, typename KeyOf, typename Combine>
  static B merge_combine(const B& a, const B& b, Less less, KeyOf key_of, Combine combine) {
    return B(merge_combine_rec(a.root(), b.root(), less, key_of, combine));
  }

 private:
  using NodePtr = typename B::NodePtr;

  template <typename Less>
  static void partition_sorted_rec(const B& b, const std::vector<Key>& pivots, std::size_t lo,
                                   std::size_t hi, std::vector<B>& out, Less less) {
    if (lo == hi) {
      out[lo] = b;
      return;
    }
    DepthScope d;
    std::size_t mid = lo + (hi - lo) / 2;
    auto [low, high] =
        split_le(b, pivots[mid], less, [](const T& x) -> const Key& { return key_ref(x); });
    partition_sorted_rec(low, pivots, lo, mid, out, less);
    partition_sorted_rec(high, pivots, mid + 1, hi, out, less);
  }

  // partition_sorted requires T to expose its key via BatchKey<T>.
  static const Key& key_ref(const T& x);

  template <typename Less, typename KeyOf>
  static NodePtr merge_rec(const NodePtr& a, const NodePtr& b, Less less, KeyOf key_of) {
    if (!a) return b;
    if (!b) return a;
    DepthScope d;
    if (a->leaf()) {
      B bb(b);
      std::uint64_t pos =
          BatchOps::prefix_length(bb, [&](const T& x) { return less(key_of(x), key_of(a->item)); });
      auto [bl, br] = bb.split(pos);
      return B::join_node(B::join_node(bl.root(), a), br.root());
    }
    if (b->leaf()) {
      B aa(a);
      std::uint64_t pos =
          BatchOps::prefix_length(aa, [&](const T& x) { return !less(key_of(b->item), key_of(x)); });
      auto [al, ar] = aa.split(pos);
      return B::join_node(B::join_node(al.root(), b), ar.root());
    }
    const NodePtr& al = a->left;
    const NodePtr& ar = a->right;
    const T& m = al->item;  // rightmost item of the left half
    B bb(b);
    std::uint64_t pos =
        BatchOps::prefix_length(bb, [&](const T& x) { return less(key_of(x), key_of(m)); });
    auto [bl, br] = bb.split(pos);
    NodePtr left = merge_rec(al, bl.root(), less, key_of);
    NodePtr right = merge_rec(ar, br.root(), less, key_of);
    return B::join_node(left, right);
  }

  template <typename Less, typename KeyOf, typename Combine>
  static NodePtr merge_combine_rec(const NodePtr& a, const NodePtr& b, Less less, KeyOf key_of,
                                   Combine combine) {
    if (!a) return b;
    if (!b) return a;
    DepthScope d;
    if (a->leaf()) {
      B bb(b);
      std::uint64_t lt =
          BatchOps::prefix_length(bb, [&](const T& x) { return less(key_of(x), key_of(a->item)); });
      std::uint64_t le =
          BatchOps::prefix_length(bb, [&](const T& x) { return !less(key_of(a->item), key_of(x)); });
      auto [bl, rest] = bb.split(lt);
      auto [bm, br] = rest.split(le - lt);
      NodePtr mid;
      if (bm.empty()) {
        mid = a;
      } else {
        mid = B::make_leaf(combine(a->item, bm.at(0)));
      }
      return B::join_node(B::join_node(bl.root(), mid), br.root());
    }
    const NodePtr& al = a->left;
    const NodePtr& ar = a->right;
    const T& m = al->item;
    B bb(b);
    std::uint64_t lt =
        BatchOps::prefix_length(bb, [&](const T& x) { return less(key_of(x), key_of(m)); });
    std::uint64_t le =
        BatchOps::prefix_length(bb, [&](const T& x) { return !less(key_of(m), key_of(x)); });
    auto [bl, rest] = bb.split(lt);
    auto [bm, br] = rest.split(le - lt);
    if (bm.empty()) {
      NodePtr left = merge_combine_rec(al, bl.root(), less, key_of, combine);
      NodePtr right = merge_combine_rec(ar, br.root(), less, key_of, combine);
      return B::join_node(left, right);
    }
    // Extract the matching boundary item of `a`, combine, and stitch.
    B aa_left(al);
    auto [al_head, al_last] = aa_left.split(aa_left.size() - 1);
    NodePtr mid = B::make_leaf(combine(al_last.at(0), bm.at(0)));
    NodePtr left = merge_combine_rec(al_head.root(), bl.root(), less, key_of, combine);
    NodePtr right = merge_combine_rec(ar, br.root(), less, key_of, combine);
    return B::join_node(B::join_node(left, mid), right);
  }
};

// Key projection used by partition_sorted; specialize or rely on members.
template <typename T>
struct BatchKey {
  static const Key& get(const T& x) { return x.key; }
};
template <>
struct BatchKey<Key> {
  static const Key& get(const Key& x) { return x; }
};

template <typename T>
const Key& BatchOps<T>::key_ref(const T& x) {
  return BatchKey<T>::get(x);
}

// Appendable collection of batches: constant-time add, linear conversion to
// a single batch preserving add order.
template <typename T>
class Bunch {
 public:
  void add(Batch<T> b) {
    charge_nodes(1);
    count_ += b.size();
    parts_.push_back(std::move(b));
  }
  std::uint64_t op_count() const { return count_; }
  bool empty() const { return count_ == 0; }
  std::uint64_t part_count() const { return parts_.size(); }

  Batch<T> to_batch() const {
    std::vector<Batch<T>> v(parts_.begin(), parts_.end());
    return Batch<T>::join(v);
  }

  void clear() {
    parts_.clear();
    count_ = 0;
  }

 private:
  std::deque<Batch<T>> parts_;
  std::uint64_t count_ = 0;
};

}  // namespace fingers
