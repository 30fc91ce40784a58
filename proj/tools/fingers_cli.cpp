// Workload harness: generates or replays operation traces against any of the
// four map variants, checks results against the sequential oracle, sweeps
// structure invariants, and reports work / finger-bound ratios as CSV.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "fingers/batch_finger_map.hpp"
#include "fingers/ledger.hpp"
#include "fingers/multi_finger_map.hpp"
#include "fingers/oracle.hpp"
#include "fingers/pipelined_finger_map.hpp"
#include "fingers/serial_finger_map.hpp"
#include "fingers/sync.hpp"
#include "fingers/workload.hpp"

namespace {

using namespace fingers;

struct Options {
  std::string structure = "fs1";
  std::string ops_file;
  std::string gen;
  std::uint64_t n = 10000;
  std::int64_t keyspace = 1 << 20;
  int p = 1;
  std::uint64_t seed = 1;
  std::uint64_t check_every = 0;  // 0: invariant scan at the end only
  std::string csv;
  std::uint64_t prefill = 0;
  std::uint64_t batch = 256;
  std::string fingers;  // comma-separated initial finger keys (mf only)
};

struct Report {
  std::uint64_t n_ops = 0;
  std::uint64_t total_work = 0;
  double f_l = 0.0;
  int max_segment_level = 0;
  std::uint64_t invariant_failures = 0;
  double wall_time = 0.0;
  bool results_ok = false;
  std::string failure;
};

WorkloadSpec make_spec(const Options& opt) {
  WorkloadSpec spec;
  std::string g = opt.gen;
  auto open = g.find('(');
  if (open != std::string::npos) {
    auto close = g.find(')', open);
    if (close == std::string::npos)
      throw std::invalid_argument("malformed --gen argument: " + opt.gen);
    spec.param = std::stod(g.substr(open + 1, close - open - 1));
    g.resize(open);
  } else if (g == "zipf") {
    spec.param = 1.1;
  } else {
    spec.param = 0.9;
  }
  spec.distribution = g;
  spec.n_ops = opt.n;
  spec.key_space = opt.keyspace;
  spec.seed = opt.seed;
  spec.prefill = opt.prefill;
  return spec;
}

std::vector<Key> parse_finger_keys(const std::string& s) {
  std::vector<Key> keys;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    keys.push_back(std::stoll(item));
  }
  return keys;
}

std::uint64_t count_violations(const std::vector<std::string>& v, std::string* first) {
  if (!v.empty() && first && first->empty()) *first = v.front();
  return v.size();
}

template <typename Map>
int max_level_of(const Map& m) {
  return std::max(0, m.store().top_level());
}

std::vector<OpCall> to_calls(const std::vector<Operation>& ops) {
  std::vector<OpCall> calls(ops.size());
  for (std::size_t i = 0; i < ops.size(); ++i) calls[i].op = ops[i];
  return calls;
}

void run_fs0(const Options& opt, const std::vector<Operation>& ops, CostLedger& ledger,
             Report& rep, std::vector<LinRecord>& lin) {
  SerialFingerMap map(&ledger);
  std::uint64_t done = 0;
  for (const Operation& op : ops) {
    map.execute(op);
    ++done;
    if (opt.check_every > 0 && done % opt.check_every == 0)
      rep.invariant_failures += count_violations(map.check_invariants(), &rep.failure);
  }
  rep.invariant_failures += count_violations(map.check_invariants(), &rep.failure);
  rep.max_segment_level = max_level_of(map);
  lin = map.linearization();
}

template <typename Map>
void run_in_batches(const Options& opt, std::vector<OpCall>& calls, Map& map, Report& rep) {
  std::uint64_t since_check = 0;
  for (std::size_t off = 0; off < calls.size(); off += opt.batch) {
    std::size_t end = std::min(calls.size(), off + opt.batch);
    std::vector<OpCall*> batch;
    batch.reserve(end - off);
    for (std::size_t i = off; i < end; ++i) batch.push_back(&calls[i]);
    map.process_batch(batch);
    since_check += batch.size();
    if (opt.check_every > 0 && since_check >= opt.check_every) {
      since_check = 0;
      rep.invariant_failures += count_violations(map.check_invariants(), &rep.failure);
    }
  }
  rep.invariant_failures += count_violations(map.check_invariants(), &rep.failure);
}

void run_fs1(const Options& opt, const std::vector<Operation>& ops, CostLedger& ledger,
             Report& rep, std::vector<LinRecord>& lin) {
  std::vector<OpCall> calls = to_calls(ops);
  BatchFingerMap map(&ledger);
  run_in_batches(opt, calls, map, rep);
  rep.max_segment_level = max_level_of(map);
  lin = map.linearization();
}

void run_mf(const Options& opt, const std::vector<Operation>& ops, CostLedger& ledger,
            Report& rep, std::vector<LinRecord>& lin, std::vector<Key>* finger_keys) {
  *finger_keys = parse_finger_keys(opt.fingers);
  std::vector<OpCall> calls = to_calls(ops);
  MultiFingerMap map(*finger_keys, &ledger);
  run_in_batches(opt, calls, map, rep);
  rep.max_segment_level = 0;
  for (int s = 0; s < map.sector_count(); ++s)
    rep.max_segment_level = std::max(rep.max_segment_level, max_level_of(map.sector(s)));
  lin = map.linearization();
}

void drain_until_idle(SerialExecutor& exec, PipelinedFingerMap& map) {
  for (int iter = 0; iter < 1 << 22; ++iter) {
    exec.drain();
    if (map.idle()) return;
  }
  throw std::runtime_error("pipelined map failed to quiesce on the serial executor");
}

void run_fs2(const Options& opt, const std::vector<Operation>& ops, CostLedger& ledger,
             Report& rep, std::vector<LinRecord>& lin) {
  std::vector<OpCall> calls = to_calls(ops);
  if (opt.p <= 1) {
    SerialExecutor exec;
    PipelinedFingerMap map(1, &exec, &ledger);
    std::uint64_t since_check = 0;
    for (OpCall& c : calls) {
      map.submit(&c);
      if (opt.check_every > 0 && ++since_check >= opt.check_every) {
        since_check = 0;
        drain_until_idle(exec, map);  // invariants only hold at quiescent points
        rep.invariant_failures += count_violations(map.check_invariants(), &rep.failure);
      }
    }
    drain_until_idle(exec, map);
    rep.invariant_failures += count_violations(map.check_invariants(), &rep.failure);
    rep.max_segment_level = max_level_of(map);
    lin = map.linearization();
    for (const OpCall& c : calls)
      if (!c.is_done()) throw std::runtime_error("operation left incomplete after quiescence");
  } else {
    ThreadPoolExecutor exec(opt.p);
    PipelinedFingerMap map(opt.p, &exec, &ledger);
    std::vector<std::thread> workers;
    workers.reserve(opt.p);
    for (int w = 0; w < opt.p; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t i = w; i < calls.size(); i += opt.p) map.submit(&calls[i]);
      });
    }
    for (auto& t : workers) t.join();
    for (OpCall& c : calls) c.wait();
    for (int iter = 0; !map.idle(); ++iter) {
      exec.wait_idle();
      if (iter > 1000) throw std::runtime_error("pipelined map failed to quiesce");
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    rep.invariant_failures += count_violations(map.check_invariants(), &rep.failure);
    rep.max_segment_level = max_level_of(map);
    lin = map.linearization();
  }
}

int run(const Options& opt) {
  std::vector<Operation> ops;
  if (!opt.ops_file.empty()) {
    std::ifstream in(opt.ops_file);
    if (!in) {
      std::cerr << "cannot open ops file: " << opt.ops_file << "\n";
      return 2;
    }
    ops = parse_ops(in);
  } else {
    ops = generate(make_spec(opt));
  }

  bool has_moves = std::any_of(ops.begin(), ops.end(), [](const Operation& o) {
    return o.type == OpType::kFingerMove;
  });
  if (has_moves && opt.structure != "mf") {
    std::cerr << "finger-move ops require --structure mf\n";
    return 2;
  }

  CostLedger ledger;
  ledger.configure_ops(ops.size());

  Report rep;
  rep.n_ops = ops.size();
  std::vector<LinRecord> lin;
  std::vector<Key> finger_keys;

  auto t0 = std::chrono::steady_clock::now();
  if (opt.structure == "fs0") {
    run_fs0(opt, ops, ledger, rep, lin);
  } else if (opt.structure == "fs1") {
    run_fs1(opt, ops, ledger, rep, lin);
  } else if (opt.structure == "fs2") {
    run_fs2(opt, ops, ledger, rep, lin);
  } else if (opt.structure == "mf") {
    run_mf(opt, ops, ledger, rep, lin, &finger_keys);
  } else {
    std::cerr << "unknown structure: " << opt.structure << "\n";
    return 2;
  }
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (lin.size() != ops.size()) {
    rep.results_ok = false;
    rep.failure = "linearization has " + std::to_string(lin.size()) + " records for " +
                  std::to_string(ops.size()) + " ops";
  } else {
    VerifyResult vr = verify_linearization(lin, finger_keys);
    rep.results_ok = vr.ok;
    rep.f_l = vr.f_total;
    if (!vr.ok) rep.failure = vr.detail;
  }

  rep.total_work = ledger.total_work();
  double ratio = rep.f_l > 0.0 ? static_cast<double>(rep.total_work) / rep.f_l : 0.0;

  char line[256];
  std::snprintf(line, sizeof(line), "%s,%llu,%d,%llu,%.2f,%.4f,%d,%llu,%.3f",
                opt.structure.c_str(), static_cast<unsigned long long>(rep.n_ops), opt.p,
                static_cast<unsigned long long>(rep.total_work), rep.f_l, ratio,
                rep.max_segment_level, static_cast<unsigned long long>(rep.invariant_failures),
                rep.wall_time);

  static const char* kHeader =
      "structure,n_ops,p,total_work,F_L,ratio,max_segment_level,invariant_failures,wall_time";
  if (!opt.csv.empty()) {
    bool fresh = !std::filesystem::exists(opt.csv) || std::filesystem::file_size(opt.csv) == 0;
    std::ofstream out(opt.csv, std::ios::app);
    if (!out) {
      std::cerr << "cannot open csv file: " << opt.csv << "\n";
      return 2;
    }
    if (fresh) out << kHeader << "\n";
    out << line << "\n";
  }
  std::cout << kHeader << "\n" << line << "\n";

  if (!rep.results_ok || rep.invariant_failures > 0) {
    std::cerr << "FAILED: " << (rep.failure.empty() ? "invariant violations" : rep.failure)
              << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"finger-search structure workload harness"};
  app.add_option("--structure", opt.structure, "fs0|fs1|fs2|mf")->capture_default_str();
  auto* file_opt = app.add_option("--ops-file", opt.ops_file, "replay a recorded ops file");
  app.add_option("--gen", opt.gen,
                 "generate: uniform|finger-local(l)|zipf(s)|adversarial-cascade")
      ->excludes(file_opt);
  app.add_option("--n", opt.n, "generated op count")->capture_default_str();
  app.add_option("--keyspace", opt.keyspace, "generated key range")->capture_default_str();
  app.add_option("--p", opt.p, "fs2 parallelism / submitting workers")->capture_default_str();
  app.add_option("--seed", opt.seed, "workload seed")->capture_default_str();
  app.add_option("--check-every", opt.check_every,
                 "invariant scan period in ops (0: final scan only)")
      ->capture_default_str();
  app.add_option("--csv", opt.csv, "append the report row to this CSV file");
  app.add_option("--prefill", opt.prefill, "distinct-key inserts prepended to the trace")
      ->capture_default_str();
  app.add_option("--batch", opt.batch, "fs1/mf batch size")->capture_default_str();
  app.add_option("--fingers", opt.fingers, "mf: comma-separated initial finger keys");
  CLI11_PARSE(app, argc, argv);

  if (opt.ops_file.empty() && opt.gen.empty()) opt.gen = "uniform";
  if (opt.batch == 0) opt.batch = 1;

  try {
    return run(opt);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
