#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "fingers/batch.hpp"
#include "fingers/ledger.hpp"

namespace fingers {

// A group of equal-keyed items kept as a binary tree of leaves in original
// order. Combining two bundles is O(1): both become children of a new root,
// so a bundle built during a merge sort has height bounded by the height of
// the input tree it came from.
template <typename T>
class Bundle {
 public:
  struct Node {
    std::shared_ptr<const Node> left, right;
    T item;
    std::uint64_t size;
    std::uint32_t height;
    bool leaf() const { return !left; }
  };
  using NodePtr = std::shared_ptr<const Node>;

  Bundle() = default;

  static Bundle single(T item) {
    charge_nodes(1);
    auto n = std::make_shared<Node>();
    n->item = std::move(item);
    n->size = 1;
    n->height = 0;
    return Bundle(std::move(n));
  }

  static Bundle combine(const Bundle& a, const Bundle& b) {
    charge_nodes(1);
    auto n = std::make_shared<Node>();
    n->left = a.root_;
    n->right = b.root_;
    n->item = a.root_->item;  // exemplar: first member in order
    n->size = a.size() + b.size();
    n->height = 1 + std::max(a.root_->height, b.root_->height);
    return Bundle(std::move(n));
  }

  bool empty() const { return !root_; }
  std::uint64_t size() const { return root_ ? root_->size : 0; }
  std::uint32_t height() const { return root_ ? root_->height : 0; }

  // Exemplar member (the first in order); carries the shared sort key.
  const T& item() const { return root_->item; }

  // Last member in order; O(height).
  const T& last() const {
    const Node* n = root_.get();
    while (!n->leaf()) {
      charge_nodes(1);
      n = n->right.get();
    }
    return n->item;
  }

  void for_each(const std::function<void(const T&)>& fn) const { visit(root_.get(), fn); }

  const NodePtr& root() const { return root_; }

 private:
  explicit Bundle(NodePtr n) : root_(std::move(n)) {}

  static void visit(const Node* n, const std::function<void(const T&)>& fn) {
    if (!n) return;
    if (n->leaf()) {
      fn(n->item);
      return;
    }
    DepthScope d;
    charge_nodes(1);
    visit(n->left.get(), fn);
    visit(n->right.get(), fn);
  }

  NodePtr root_;
};

// Rebuilds a possibly skewed bundle into a balanced batch of its members in
// order. Linear counted work, instrumented depth proportional to the bundle
// height plus a logarithmic rebuild term.
template <typename T>
Batch<T> bundle_balance(const Bundle<T>& b) {
  std::vector<T> items;
  items.reserve(b.size());
  b.for_each([&](const T& x) { items.push_back(x); });
  return Batch<T>::from_vector(items);
}

template <typename T>
struct SortKeyOfIdentity {
  const T& operator()(const T& x) const { return x; }
};

// Stable parallel merge sort over a batch: O(n log n) comparisons.
template <typename T, typename Less>
Batch<T> pmsort(const Batch<T>& b, Less less) {
  if (b.size() <= 1) return b;
  DepthScope d;
  auto [lo, hi] = b.split(b.size() / 2);
  Batch<T> sl = pmsort(lo, less);
  Batch<T> sr = pmsort(hi, less);
  return BatchOps<T>::merge(sl, sr, less, SortKeyOfIdentity<T>{});
}

namespace detail {

template <typename T, typename Less>
Batch<Bundle<T>> pesort_node(const typename Batch<T>::NodePtr& n, Less less) {
  using BB = Batch<Bundle<T>>;
  if (!n) return BB{};
  if (n->leaf()) return BB::single(Bundle<T>::single(n->item));
  DepthScope d;
  BB l = pesort_node<T, Less>(n->left, less);
  BB r = pesort_node<T, Less>(n->right, less);
  auto key_of = [](const Bundle<T>& g) -> const T& { return g.item(); };
  return BatchOps<Bundle<T>>::merge_combine(l, r, less, key_of, [](const Bundle<T>& a,
                                                                   const Bundle<T>& b) {
    return Bundle<T>::combine(a, b);
  });
}

}  // namespace detail

// Entropy-adaptive stable sort: equal items (under `less`) collapse into
// bundles whose members keep input order. Comparison count adapts to the
// duplicate profile: heavy duplication costs o(n log n).
template <typename T, typename Less>
Batch<Bundle<T>> pesort(const Batch<T>& b, Less less) {
  return detail::pesort_node<T, Less>(b.root(), less);
}

// Flattens a sorted batch of bundles back to a flat sorted batch of items.
template <typename T>
Batch<T> bundles_flatten(const Batch<Bundle<T>>& bs) {
  std::vector<Batch<T>> parts;
  parts.reserve(bs.size());
  bs.for_each([&](const Bundle<T>& g) { parts.push_back(bundle_balance(g)); });
  return Batch<T>::join(parts);
}

}  // namespace fingers
