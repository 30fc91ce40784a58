#include "fingers/workload.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace fingers {

namespace {

// Exact Zipf(s) sampler over {1..n} by rejection (Devroye, "Non-Uniform
// Random Variate Generation", ch. X.6).
class ZipfSampler {
 public:
  ZipfSampler(double s, std::uint64_t n) : s_(s), n_(n) {
    hx0_ = h(0.5) - std::exp(-s_ * std::log(1.0));          // H(x0) - 1
    hn_ = h(static_cast<double>(n_) + 0.5);
  }

  std::uint64_t operator()(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (;;) {
      double u = hx0_ + uni(rng) * (hn_ - hx0_);
      double x = h_inv(u);
      std::uint64_t k = static_cast<std::uint64_t>(x + 0.5);
      if (k < 1) k = 1;
      if (k > n_) k = n_;
      if (u >= h(static_cast<double>(k) + 0.5) - std::exp(-s_ * std::log(static_cast<double>(k))))
        return k;
    }
  }

 private:
  // h(x) = integral of x^-s: antiderivative used by the rejection envelope.
  double h(double x) const {
    if (s_ == 1.0) return std::log(x);
    return std::exp((1.0 - s_) * std::log(x)) / (1.0 - s_);
  }
  double h_inv(double u) const {
    if (s_ == 1.0) return std::exp(u);
    return std::exp(std::log((1.0 - s_) * u) / (1.0 - s_));
  }

  double s_;
  std::uint64_t n_;
  double hx0_;
  double hn_;
};

Value rand_value(std::mt19937_64& rng) { return static_cast<Value>(rng() % 1000000); }

OpType pick_type(std::mt19937_64& rng) {
  std::uint64_t roll = rng() % 100;
  if (roll < 40) return OpType::kSearch;
  if (roll < 65) return OpType::kInsert;
  if (roll < 80) return OpType::kUpdate;
  return OpType::kDelete;
}

void apply_to_model(std::set<Key>& resident, const Operation& op) {
  if (op.type == OpType::kInsert) resident.insert(op.key);
  if (op.type == OpType::kDelete) resident.erase(op.key);
}

}  // namespace

std::vector<Operation> generate(const WorkloadSpec& spec) {
  bool uniform = spec.distribution == "uniform";
  bool local = spec.distribution == "finger-local";
  bool zipf = spec.distribution == "zipf";
  bool cascade = spec.distribution == "adversarial-cascade";
  if (!uniform && !local && !zipf && !cascade)
    throw std::invalid_argument("unknown distribution: " + spec.distribution);
  if (spec.key_space < 1) throw std::invalid_argument("key_space must be positive");
  if (local && !(spec.param > 0.0 && spec.param <= 1.0))
    throw std::invalid_argument("finger-local lambda must be in (0, 1]");
  if (zipf && !(spec.param > 0.0)) throw std::invalid_argument("zipf exponent must be positive");
  if (spec.prefill > static_cast<std::uint64_t>(spec.key_space))
    throw std::invalid_argument("prefill exceeds key space");

  std::mt19937_64 rng(spec.seed);
  std::vector<Operation> out;
  out.reserve(spec.prefill + spec.n_ops);
  std::uint64_t id = 0;
  std::set<Key> resident;

  if (spec.prefill > 0) {
    std::unordered_set<Key> used;
    while (used.size() < spec.prefill) {
      Key k = static_cast<Key>(rng() % static_cast<std::uint64_t>(spec.key_space));
      if (!used.insert(k).second) continue;
      out.push_back(Operation{OpType::kInsert, k, rand_value(rng), id++});
      resident.insert(k);
    }
  }

  auto uniform_key = [&] {
    return static_cast<Key>(rng() % static_cast<std::uint64_t>(spec.key_space));
  };

  if (uniform) {
    for (std::uint64_t i = 0; i < spec.n_ops; ++i)
      out.push_back(Operation{pick_type(rng), uniform_key(), rand_value(rng), id++});
  } else if (zipf) {
    ZipfSampler sample(spec.param, static_cast<std::uint64_t>(spec.key_space));
    for (std::uint64_t i = 0; i < spec.n_ops; ++i) {
      // Scatter popular ranks across the key space so popularity skew does
      // not coincide with end-of-structure locality.
      std::uint64_t rank = sample(rng) - 1;
      Key k = static_cast<Key>((rank * 2654435761ULL) % static_cast<std::uint64_t>(spec.key_space));
      out.push_back(Operation{pick_type(rng), k, rand_value(rng), id++});
    }
  } else if (local) {
    std::geometric_distribution<int> hop(spec.param);
    for (std::uint64_t i = 0; i < spec.n_ops; ++i) {
      Operation op;
      op.id = id++;
      op.value = rand_value(rng);
      if (resident.empty()) {
        op.type = OpType::kInsert;
        op.key = uniform_key();
      } else {
        op.type = pick_type(rng);
        bool front = (rng() & 1ULL) != 0;
        std::uint64_t d = static_cast<std::uint64_t>(hop(rng));
        d = std::min<std::uint64_t>(d, resident.size() - 1);
        Key base;
        if (front) {
          auto it = resident.begin();
          std::advance(it, static_cast<std::ptrdiff_t>(d));
          base = *it;
        } else {
          auto it = resident.rbegin();
          std::advance(it, static_cast<std::ptrdiff_t>(d));
          base = *it;
        }
        if (op.type == OpType::kInsert) {
          Key jitter = static_cast<Key>(1 + rng() % 3);
          Key k = front ? base - jitter : base + jitter;
          op.key = std::clamp<Key>(k, 0, spec.key_space - 1);
        } else {
          op.key = base;
        }
      }
      apply_to_model(resident, op);
      out.push_back(op);
    }
  } else {  // adversarial-cascade
    // Alternating fill/drain waves at both ends with geometrically growing
    // width: ascending inserts pile into the smallest segments and overflow
    // upward, then deletes drain them back, forcing underfull refills and
    // chain shrinks.
    std::uint64_t wave = 8;
    bool front = true;
    while (out.size() < spec.prefill + spec.n_ops) {
      Key base = front ? static_cast<Key>(rng() % 1024)
                       : spec.key_space - 1 - static_cast<Key>(rng() % 1024);
      std::vector<Key> keys;
      keys.reserve(wave);
      for (std::uint64_t j = 0; j < wave; ++j) {
        Key k = front ? base + static_cast<Key>(j) : base - static_cast<Key>(j);
        keys.push_back(std::clamp<Key>(k, 0, spec.key_space - 1));
      }
      for (Key k : keys) {
        if (out.size() >= spec.prefill + spec.n_ops) break;
        Operation op{OpType::kInsert, k, rand_value(rng), id++};
        apply_to_model(resident, op);
        out.push_back(op);
      }
      if (out.size() < spec.prefill + spec.n_ops) {
        Operation op{OpType::kSearch, keys.front(), 0, id++};
        out.push_back(op);
      }
      for (auto it = keys.rbegin(); it != keys.rend(); ++it) {
        if (out.size() >= spec.prefill + spec.n_ops) break;
        Operation op{OpType::kDelete, *it, 0, id++};
        apply_to_model(resident, op);
        out.push_back(op);
      }
      front = !front;
      if (front) wave = std::min<std::uint64_t>(wave * 2, 4096);
    }
  }
  return out;
}

std::vector<Operation> parse_ops(std::istream& in) {
  std::vector<Operation> out;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string type;
    if (!(ls >> type)) continue;  // blank line
    auto fail = [&](const std::string& why) {
      throw std::invalid_argument("ops file line " + std::to_string(line_no) + ": " + why);
    };
    if (type.size() != 1) fail("unknown op type '" + type + "'");
    Operation op;
    op.id = out.size();
    switch (type[0]) {
      case 'S': op.type = OpType::kSearch; break;
      case 'U': op.type = OpType::kUpdate; break;
      case 'I': op.type = OpType::kInsert; break;
      case 'D': op.type = OpType::kDelete; break;
      case 'M': op.type = OpType::kFingerMove; break;
      default: fail("unknown op type '" + type + "'");
    }
    if (!(ls >> op.key)) fail("missing key");
    Value v = 0;
    if (ls >> v) {
      if (op.type == OpType::kFingerMove) {
        if (v < 0) fail("negative finger index");
        op.finger = static_cast<std::uint32_t>(v);
      } else {
        op.value = v;
      }
    } else if (op.type == OpType::kUpdate || op.type == OpType::kInsert) {
      fail("missing value");
    }
    std::string rest;
    if (ls >> rest) fail("trailing token '" + rest + "'");
    out.push_back(op);
  }
  return out;
}

void emit_ops(const std::vector<Operation>& ops, std::ostream& out) {
  for (const Operation& op : ops) {
    switch (op.type) {
      case OpType::kSearch: out << "S " << op.key; break;
      case OpType::kUpdate: out << "U " << op.key << ' ' << op.value; break;
      case OpType::kInsert: out << "I " << op.key << ' ' << op.value; break;
      case OpType::kDelete: out << "D " << op.key; break;
      case OpType::kFingerMove: out << "M " << op.key << ' ' << op.finger; break;
    }
    out << '\n';
  }
}

}  // namespace fingers
