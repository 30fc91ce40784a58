#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fingers/types.hpp"

namespace fingers {

// Deterministic workload generation: the seed fully determines the trace.
struct WorkloadSpec {
  // uniform | finger-local | zipf | adversarial-cascade
  std::string distribution = "uniform";
  std::uint64_t n_ops = 0;
  Key key_space = Key{1} << 20;
  // finger-local: geometric locality lambda in (0, 1]; zipf: exponent s > 0.
  double param = 0.9;
  std::uint64_t seed = 1;
  // Leading inserts of this many distinct uniform keys (ids come first).
  std::uint64_t prefill = 0;
};

// Generates `prefill + n_ops` operations with ids 0..count-1.
// Throws std::invalid_argument for an unknown distribution or bad params.
std::vector<Operation> generate(const WorkloadSpec& spec);

// Plain-text ops files: one op per line, `<type> <key> [<value>]` with types
// S/U/I/D/M; for M the value is the finger index. '#' starts a comment.
// Parsing assigns ids in line order; throws std::invalid_argument with the
// line number on malformed input.
std::vector<Operation> parse_ops(std::istream& in);
void emit_ops(const std::vector<Operation>& ops, std::ostream& out);

}  // namespace fingers
