#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace fingers {

using Key = std::int64_t;
using Value = std::int64_t;

enum class OpType : std::uint8_t {
  kSearch = 0,
  kUpdate = 1,
  kInsert = 2,
  kDelete = 3,
  kFingerMove = 4,
};

inline const char* op_type_name(OpType t) {
  switch (t) {
    case OpType::kSearch: return "search";
    case OpType::kUpdate: return "update";
    case OpType::kInsert: return "insert";
    case OpType::kDelete: return "delete";
    case OpType::kFingerMove: return "move";
  }
  return "?";
}

struct Operation {
  OpType type = OpType::kSearch;
  Key key = 0;
  Value value = 0;
  std::uint64_t id = 0;
  // Finger moves only: which finger, and whether the new position sits
  // just before `key` (true) or just after it (false).
  std::uint32_t finger = 0;
  bool before = true;
};

// `found` reports presence at the operation's linearization point (for
// inserts: whether the key was already present). `value` is the value
// observed at that point (search: value read; update/insert/delete: the
// previous value when found). Rejected finger moves set `rejected`.
struct OpResult {
  bool found = false;
  Value value = 0;
  bool rejected = false;

  bool operator==(const OpResult&) const = default;
};

// A submitted operation together with its result slot. The submitter owns
// the call and must keep it alive until completion. `wait` blocks; with a
// serial executor the driver drains the queue first, so `wait` never spins.
struct OpCall {
  Operation op;
  OpResult result;
  std::atomic<int> done{0};

  // Scratch used by the batch processing run that currently owns the call;
  // never read concurrently.
  struct {
    bool found = false;
    Value value = 0;
    int side = 0;
    int level = -1;  // -1: fits no first-slab section
  } tag;

  void complete() {
    done.store(1, std::memory_order_release);
    done.notify_all();
  }
  void wait() const {
    int v = done.load(std::memory_order_acquire);
    while (v == 0) {
      done.wait(0, std::memory_order_acquire);
      v = done.load(std::memory_order_acquire);
    }
  }
  bool is_done() const { return done.load(std::memory_order_acquire) != 0; }
};

class StructureError : public std::logic_error {
 public:
  explicit StructureError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace fingers
