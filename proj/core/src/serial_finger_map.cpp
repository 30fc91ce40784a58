#include "fingers/serial_finger_map.hpp"

namespace fingers {

OpResult SerialFingerMap::execute(const Operation& op) {
  LedgerScope ls(ledger_);
  OpResult result;
  Placement where{};
  {
    OpScope os(op.id);
    where = *store_.locate(op.key);  // full-range probe always succeeds
    Segment& seg = store_.segment(where.side, where.level);
    SectionScope ss(where.level);

    bool found = false;
    Value prev = 0;
    seg.store.sorted_batch_access(
        Batch<Key>{op.key}, [](Key k) { return k; },
        [&](Key, bool present, Value& live) {
          found = present;
          prev = present ? live : Value{0};
          switch (op.type) {
            case OpType::kSearch:
              return MapAction::kNone;
            case OpType::kUpdate:
              if (present) live = op.value;
              return MapAction::kNone;
            case OpType::kInsert:
              if (present) {
                live = op.value;
                return MapAction::kNone;
              }
              return MapAction::kInsert;
            case OpType::kDelete:
              return present ? MapAction::kErase : MapAction::kNone;
            default:
              return MapAction::kNone;
          }
        },
        [&](Key) { return op.value; });
    seg.refresh_bounds();
    result = OpResult{found, prev, false};
  }
  {
    RebalanceScope rs;
    store_.cascade_fix(where.side, where.level);
    store_.chain_fix_sequential();
    store_.publish_all();
  }
  lin_.push_back({op.id, op.type, op.key, op.value, result});
  return result;
}

void SerialFingerMap::rebalance_segment(int side, int level) {
  LedgerScope ls(ledger_);
  RebalanceScope rs;
  store_.cascade_fix(side, level);
}

void SerialFingerMap::rebalance_chains() {
  LedgerScope ls(ledger_);
  RebalanceScope rs;
  store_.chain_fix_sequential();
}

}  // namespace fingers
