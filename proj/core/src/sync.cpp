#include "fingers/sync.hpp"

namespace fingers {

ThreadPoolExecutor::ThreadPoolExecutor(int threads) {
  if (threads < 1) threads = 1;
  workers_.reserve(threads);
  for (int i = 0; i < threads; ++i) workers_.emplace_back([this] { worker(); });
}

ThreadPoolExecutor::~ThreadPoolExecutor() {
  {
    std::lock_guard<std::mutex> g(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  for (auto& w : workers_) w.join();
}

void ThreadPoolExecutor::post(std::function<void()> task) {
  {
    std::lock_guard<std::mutex> g(mu_);
    queue_.push_back(std::move(task));
  }
  cv_.notify_one();
}

void ThreadPoolExecutor::wait_idle() {
  std::unique_lock<std::mutex> g(mu_);
  idle_cv_.wait(g, [this] { return queue_.empty() && active_ == 0; });
}

void ThreadPoolExecutor::worker() {
  for (;;) {
    std::function<void()> task;
    {
      std::unique_lock<std::mutex> g(mu_);
      cv_.wait(g, [this] { return stop_ || !queue_.empty(); });
      if (queue_.empty()) return;  // stop requested and nothing left
      task = std::move(queue_.front());
      queue_.pop_front();
      ++active_;
    }
    task();
    {
      std::lock_guard<std::mutex> g(mu_);
      --active_;
      if (queue_.empty() && active_ == 0) idle_cv_.notify_all();
    }
  }
}

DedicatedLock::DedicatedLock(int keys) {
  if (keys < 1) keys = 1;
  slots_.reserve(keys);
  for (int i = 0; i < keys; ++i) slots_.push_back(std::make_unique<Slot>());
}

void DedicatedLock::log(Event::Kind kind, int key) {
  if (!logging_.load(std::memory_order_relaxed)) return;
  std::lock_guard<std::mutex> g(log_mu_);
  log_.push_back({kind, key});
}

std::vector<DedicatedLock::Event> DedicatedLock::take_log() {
  std::lock_guard<std::mutex> g(log_mu_);
  std::vector<Event> out;
  out.swap(log_);
  return out;
}

void DedicatedLock::acquire(int key) {
  // The request is logged only once this key is registered in the count:
  // from that moment every release must hand off (or spin for a parked
  // waiter), which is what bounds how often other keys can be granted while
  // this one waits. Logging any earlier would put unregistered wall-clock
  // time inside the measured window.
  if (count_.fetch_add(1, std::memory_order_acq_rel) == 0) {
    log(Event::kRequest, key);
    last_.store(key, std::memory_order_relaxed);
    log(Event::kGrant, key);
    return;
  }
  log(Event::kRequest, key);
  Slot& slot = *slots_[key];
  if (slot.parked.exchange(true, std::memory_order_acq_rel))
    throw StructureError("dedicated lock key used concurrently");
  slot.sem.acquire();  // the releaser logs the grant on our behalf
}

void DedicatedLock::release() {
  if (count_.fetch_add(-1, std::memory_order_acq_rel) <= 1) return;
  // Someone is (or is about to be) parked: scan cyclically from the last
  // holder until a parked key becomes visible, then hand off.
  int k = keys();
  int j = last_.load(std::memory_order_relaxed);
  for (;;) {
    j = (j + 1) % k;
    if (slots_[j]->parked.exchange(false, std::memory_order_acq_rel)) break;
  }
  last_.store(j, std::memory_order_relaxed);
  log(Event::kGrant, j);
  slots_[j]->sem.release();
}

namespace detail {
int worker_slot_id() {
  static std::atomic<int> next{0};
  thread_local int id = next.fetch_add(1, std::memory_order_relaxed);
  return id;
}
}  // namespace detail

}  // namespace fingers
