#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <semaphore>
#include <thread>
#include <vector>

#include "fingers/ledger.hpp"
#include "fingers/types.hpp"

namespace fingers {

// Task-submission abstraction. Structures post their processing runs here;
// the executor decides where and when they execute.
class Executor {
 public:
  virtual ~Executor() = default;
  virtual void post(std::function<void()> task) = 0;
  virtual bool serial() const { return false; }
};

// Deterministic single-threaded executor: tasks run in FIFO order when the
// owner drains the queue. Not thread-safe; drive it from one thread.
class SerialExecutor final : public Executor {
 public:
  void post(std::function<void()> task) override { queue_.push_back(std::move(task)); }
  bool serial() const override { return true; }

  // Runs queued tasks (including ones they post) until none remain.
  void drain() {
    while (!queue_.empty()) {
      auto task = std::move(queue_.front());
      queue_.pop_front();
      task();
    }
  }
  std::size_t pending() const { return queue_.size(); }

 private:
  std::deque<std::function<void()>> queue_;
};

// Fixed-size thread pool. Blocking primitives inside tasks are acceptable as
// long as the pool is sized generously relative to the pipeline depth.
class ThreadPoolExecutor final : public Executor {
 public:
  explicit ThreadPoolExecutor(int threads);
  ~ThreadPoolExecutor() override;

  void post(std::function<void()> task) override;
  // Blocks until no task is queued or running.
  void wait_idle();
  int thread_count() const { return static_cast<int>(workers_.size()); }

 private:
  void worker();

  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<std::function<void()>> queue_;
  int active_ = 0;
  bool stop_ = false;
  std::vector<std::thread> workers_;
};

// Single-flag test-and-set lock; try_lock never blocks.
class NonBlockingLock {
 public:
  bool try_lock() { return !flag_.test_and_set(std::memory_order_acquire); }
  void unlock() { flag_.clear(std::memory_order_release); }

 private:
  std::atomic_flag flag_ = ATOMIC_FLAG_INIT;
};

// Wraps a procedure so that concurrent reactivations coalesce: runs never
// overlap, at most one run per reactivation, and a complete run starts after
// every reactivation.
class ReactivationWrapper {
 public:
  ReactivationWrapper() = default;
  ReactivationWrapper(Executor* exec, std::function<void()> fn)
      : exec_(exec), fn_(std::move(fn)) {}
  void configure(Executor* exec, std::function<void()> fn) {
    exec_ = exec;
    fn_ = std::move(fn);
  }

  void reactivate() {
    reactivations_.fetch_add(1, std::memory_order_relaxed);
    if (count_.fetch_add(1, std::memory_order_acq_rel) == 0)
      exec_->post([this] { loop(); });
  }

  std::uint64_t runs() const { return runs_.load(std::memory_order_relaxed); }
  std::uint64_t reactivations() const { return reactivations_.load(std::memory_order_relaxed); }

  // True while a run is in flight or owed. A nonzero count also covers the
  // window inside reactivate() between registering and posting, so once every
  // task of a quiesced structure reports !pending(), no further run can start.
  bool pending() const {
    return running_.load(std::memory_order_acquire) ||
           count_.load(std::memory_order_acquire) != 0;
  }

 private:
  void loop() {
    do {
      count_.store(1, std::memory_order_release);
      if (running_.exchange(true, std::memory_order_acq_rel))
        throw StructureError("reactivation wrapper runs overlapped");
      runs_.fetch_add(1, std::memory_order_relaxed);
      fn_();
      running_.store(false, std::memory_order_release);
    } while (count_.fetch_add(-1, std::memory_order_acq_rel) > 1);
  }

  Executor* exec_ = nullptr;
  std::function<void()> fn_;
  std::atomic<std::int64_t> count_{0};
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> runs_{0};
  std::atomic<std::uint64_t> reactivations_{0};
};

// Mutual-exclusion lock where each concurrent acquirer uses its own key.
// Release hands off to a parked key scanning cyclically from the last
// holder, which bounds bypass: a pending acquirer waits through at most one
// successful acquisition per other key.
class DedicatedLock {
 public:
  explicit DedicatedLock(int keys);

  void acquire(int key);  // blocks until held
  void release();
  int keys() const { return static_cast<int>(slots_.size()); }

  struct Event {
    enum Kind { kRequest, kGrant } kind;
    int key;
  };
  void set_logging(bool on) { logging_.store(on, std::memory_order_relaxed); }
  std::vector<Event> take_log();

 private:
  void log(Event::Kind kind, int key);

  struct Slot {
    std::binary_semaphore sem{0};
    std::atomic<bool> parked{false};
  };

  std::atomic<std::int64_t> count_{0};
  std::atomic<int> last_{0};
  std::vector<std::unique_ptr<Slot>> slots_;

  std::atomic<bool> logging_{false};
  std::mutex log_mu_;
  std::vector<Event> log_;
};

namespace detail {
int worker_slot_id();
}

// Relaxed-order submission buffer: per-worker sub-buffers plus a fan-in-2
// flag tree whose root transition triggers the owner's notification. Every
// submitted item lands in exactly one flush, and a submission concurrent
// with a flush is included in that flush or the next one.
template <typename T>
class ParallelBuffer {
 public:
  ParallelBuffer(int slots, std::function<void()> notify)
      : notify_(std::move(notify)), slots_(slots < 1 ? 1 : slots),
        subs_(static_cast<std::size_t>(slots < 1 ? 1 : slots)),
        flags_(2 * static_cast<std::size_t>(slots < 1 ? 1 : slots) - 1) {}

  void submit(T item) {
    int s = detail::worker_slot_id() % slots_;
    {
      std::lock_guard<std::mutex> g(subs_[s].mu);
      subs_[s].items.push_back(std::move(item));
    }
    charge_nodes(1);
    // Climb the flag tree; stop at the first flag already set (some other
    // climber continues above it). Setting the root notifies the owner.
    std::size_t i = flags_.size() - slots_ + static_cast<std::size_t>(s);
    for (;;) {
      if (flags_[i].exchange(true, std::memory_order_acq_rel)) return;
      if (i == 0) {
        notify_();
        return;
      }
      i = (i - 1) / 2;
    }
  }

  // Owner only. Clears every flag before swapping sub-buffers out, so a
  // racing submission either lands in this flush or re-sets a cleared flag
  // and produces a fresh notification.
  std::vector<T> flush() {
    for (auto& f : flags_) f.store(false, std::memory_order_release);
    std::vector<T> out;
    for (auto& sub : subs_) {
      std::vector<T> items;
      {
        std::lock_guard<std::mutex> g(sub.mu);
        items.swap(sub.items);
      }
      for (auto& it : items) out.push_back(std::move(it));
    }
    charge_nodes(1 + out.size());
    return out;
  }

  bool maybe_nonempty() const { return flags_[0].load(std::memory_order_acquire); }

 private:
  struct Sub {
    std::mutex mu;
    std::vector<T> items;
  };

  std::function<void()> notify_;
  int slots_;
  std::deque<Sub> subs_;  // deque: Sub is immovable (mutex)
  std::vector<std::atomic<bool>> flags_;
};

}  // namespace fingers
