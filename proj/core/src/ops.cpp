#include "fingers/ops.hpp"

#include <algorithm>

namespace fingers {

TypedGroups build_groups(const std::vector<OpCall*>& calls) {
  TypedGroups out;
  if (calls.empty()) return out;
  Batch<OpCall*> flat = Batch<OpCall*>::from_vector(calls);
  Batch<Bundle<OpCall*>> bundles = pesort(flat, CallOrder{});
  std::array<std::vector<OpGroup>, 4> split;
  bundles.for_each([&](const Bundle<OpCall*>& bundle) {
    OpCall* first = bundle.item();
    OpGroup g;
    g.members = bundle;
    g.type = first->op.type;
    g.key = first->op.key;
    g.effect = bundle.last();
    split[type_rank(g.type)].push_back(std::move(g));
  });
  for (int t = 0; t < 4; ++t)
    if (!split[t].empty()) out.per_type[t] = Batch<OpGroup>::from_vector(split[t]);
  return out;
}

void apply_groups(BPMap& store, const Batch<OpGroup>& groups, std::vector<GroupDelivery>& out) {
  if (groups.empty()) return;
  store.sorted_batch_access(
      groups, [](const OpGroup& g) { return g.key; },
      [&](const OpGroup& g, bool found, Value& live) {
        GroupDelivery d{g, found, found ? live : Value{0}};
        out.push_back(std::move(d));
        switch (g.type) {
          case OpType::kSearch:
            return MapAction::kNone;
          case OpType::kUpdate:
            if (found) live = g.effect->op.value;
            return MapAction::kNone;
          case OpType::kInsert:
            if (found) {
              live = g.effect->op.value;
              return MapAction::kNone;
            }
            return MapAction::kInsert;
          case OpType::kDelete:
            return found ? MapAction::kErase : MapAction::kNone;
          case OpType::kFingerMove:
            break;
        }
        return MapAction::kNone;
      },
      [](const OpGroup& g) { return g.effect->op.value; });
}

void deliver(const std::vector<GroupDelivery>& deliveries) {
  for (const GroupDelivery& d : deliveries) {
    fan_out(d, [](OpCall* call, const OpResult& r) {
      call->result = r;
      call->complete();
    });
  }
}

std::vector<std::size_t> inward_permutation(std::size_t count) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [count](std::size_t a, std::size_t b) {
    auto dist = [count](std::size_t i) { return std::min(i + 1, count - i); };
    return dist(a) < dist(b);
  });
  return order;
}

void emit_linearization(const std::vector<std::pair<OpCall*, OpResult>>& ineffectual,
                        std::array<std::vector<GroupDelivery>, 4>& by_type,
                        std::vector<LinRecord>& out) {
  for (const auto& [call, result] : ineffectual)
    out.push_back({call->op.id, call->op.type, call->op.key, call->op.value, result});

  auto emit_group = [&](const GroupDelivery& d) {
    fan_out(d, [&](OpCall* call, const OpResult& r) {
      out.push_back({call->op.id, call->op.type, call->op.key, call->op.value, r});
    });
  };

  for (int t = 0; t < 4; ++t) {
    auto& groups = by_type[t];
    std::sort(groups.begin(), groups.end(),
              [](const GroupDelivery& a, const GroupDelivery& b) { return a.group.key < b.group.key; });
    OpType type = static_cast<OpType>(t);
    if (type == OpType::kInsert || type == OpType::kDelete) {
      std::vector<std::size_t> order = inward_permutation(groups.size());
      if (type == OpType::kDelete) std::reverse(order.begin(), order.end());
      for (std::size_t idx : order) emit_group(groups[idx]);
    } else {
      for (const GroupDelivery& d : groups) emit_group(d);
    }
  }
}

}  // namespace fingers
