#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fingers/batch.hpp"
#include "fingers/bpmap.hpp"
#include "fingers/sort.hpp"
#include "fingers/types.hpp"

namespace fingers {

// Access types sort search < update < insert < delete, so deletions come
// last; within a type keys ascend.
inline int type_rank(OpType t) { return static_cast<int>(t); }

struct CallOrder {
  bool operator()(OpCall* a, OpCall* b) const {
    if (a->op.type != b->op.type) return type_rank(a->op.type) < type_rank(b->op.type);
    return a->op.key < b->op.key;
  }
};

// Same-type same-key operations combined; `effect` (the last member) decides
// the net change to the map.
struct OpGroup {
  Bundle<OpCall*> members;
  OpType type = OpType::kSearch;
  Key key = 0;
  OpCall* effect = nullptr;
};

struct TypedGroups {
  std::array<Batch<OpGroup>, 4> per_type;

  bool all_empty() const {
    for (const auto& b : per_type)
      if (!b.empty()) return false;
    return true;
  }
  std::uint64_t group_count() const {
    std::uint64_t n = 0;
    for (const auto& b : per_type) n += b.size();
    return n;
  }
};

// Entropy-sorts calls by (access type, key) and combines duplicates into
// group-operations, split out per access type with keys strictly ascending.
TypedGroups build_groups(const std::vector<OpCall*>& calls);

// Pre-group state captured when a group's net effect was applied to a map.
struct GroupDelivery {
  OpGroup group;
  bool found = false;
  Value value = 0;
};

// Applies key-sorted groups to one segment store in a single batched access;
// appends one delivery record per group.
void apply_groups(BPMap& store, const Batch<OpGroup>& groups, std::vector<GroupDelivery>& out);

// Computes members' results as if they ran consecutively from the group's
// pre-state, calling sink(call, result) in member order.
template <typename Sink>
void fan_out(const GroupDelivery& d, Sink&& sink) {
  bool present = d.found;
  Value cur = d.value;
  d.group.members.for_each([&](OpCall* const& call) {
    OpResult r{present, present ? cur : 0, false};
    switch (call->op.type) {
      case OpType::kSearch:
        break;
      case OpType::kUpdate:
        if (present) cur = call->op.value;
        break;
      case OpType::kInsert:
        present = true;
        cur = call->op.value;
        break;
      case OpType::kDelete:
        present = false;
        cur = 0;
        break;
      case OpType::kFingerMove:
        break;
    }
    sink(call, r);
  });
}

// Writes results into the calls and marks them complete.
void deliver(const std::vector<GroupDelivery>& deliveries);

// One linearized operation: enough to replay it against a reference map and
// compare outcomes. For finger moves `value` holds the finger index and
// `before` the side of `key` the finger lands on.
struct LinRecord {
  std::uint64_t op_id = 0;
  OpType type = OpType::kSearch;
  Key key = 0;
  Value value = 0;
  OpResult result;
  bool before = true;
};

// Inward order over ascending distinct keys: the i-th smallest key (1-based,
// u keys total) has distance min(i, u+1-i); sort ascending by (distance,
// key). Outward order is its exact reverse.
std::vector<std::size_t> inward_permutation(std::size_t count);

// Appends one processing step's records in canonical order: ineffectual
// results first (in batch order), then each access type with deletions last
// (searches/updates by key, insertions inward, deletions outward), group
// members consecutive. `by_type` entries need not be pre-sorted.
void emit_linearization(const std::vector<std::pair<OpCall*, OpResult>>& ineffectual,
                        std::array<std::vector<GroupDelivery>, 4>& by_type,
                        std::vector<LinRecord>& out);

}  // namespace fingers
