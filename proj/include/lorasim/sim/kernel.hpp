#pragma once

#include <coroutine>
#include <cstdint>
#include <exception>
#include <functional>
#include <list>
#include <memory>
#include <queue>
#include <string>
#include <unordered_set>
#include <vector>

#include "lorasim/sim/rng.hpp"
#include "lorasim/sim/task.hpp"
#include "lorasim/sim/time.hpp"

namespace lorasim::sim {

class Kernel;

/// Bookkeeping for one top-level task. Wake entries refer to it so that entries belonging to a
/// cancelled or finished task are skipped.
struct TaskControl {
  Task<> task;
  std::string name;
  std::uint64_t id = 0;
  bool finished = false;
  bool cancelled = false;
};

using TimerId = std::uint64_t;

class TaskHandle {
 public:
  TaskHandle() = default;
  TaskHandle(Kernel* kernel, std::shared_ptr<TaskControl> control)
      : kernel_(kernel), control_(std::move(control)) {}

  bool valid() const { return control_ != nullptr; }
  bool done() const;
  bool cancelled() const;
  /// Destroys the task if it is still suspended. Cancelling the running task is a StateError.
  void cancel();

 private:
  Kernel* kernel_ = nullptr;
  std::shared_ptr<TaskControl> control_;
};

/// Virtual-time discrete-event executor.
///
/// Exactly one task runs at a time. The clock only moves when the timer-lock counter is zero,
/// i.e. between resumptions, and it jumps straight to the earliest pending wake entry. Entries
/// with equal wake times run in insertion order.
class Kernel {
 public:
  explicit Kernel(SimConfig config = {});
  ~Kernel();
  Kernel(const Kernel&) = delete;
  Kernel& operator=(const Kernel&) = delete;

  const SimConfig& config() const { return config_; }
  double tick_duration() const { return config_.tick_duration; }

  SimTime now() const { return now_; }
  double now_seconds() const { return to_seconds(now_); }

  /// Nearest whole tick count; halves round toward +inf.
  std::uint64_t to_ticks(double seconds) const;
  SimTime at_seconds(double seconds) const { return SimTime{to_ticks(seconds)}; }
  double to_seconds(SimTime t) const { return static_cast<double>(t.ticks) * config_.tick_duration; }

  struct SleepAwaiter {
    Kernel* kernel;
    SimTime wake_at;
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) { kernel->schedule(h, wake_at); }
    void await_resume() const noexcept {}
  };

  /// Suspends the calling task for `seconds` of virtual time. sleep(0) yields to the other
  /// tasks runnable at the current tick.
  [[nodiscard]] SleepAwaiter sleep(double seconds);
  [[nodiscard]] SleepAwaiter sleep_until(SimTime t);

  /// Registers a root task; only allowed before run(). Root tasks start at t=0 in registration order.
  TaskHandle create_task(Task<> task, std::string name = {});
  /// Starts a task at the current tick, behind everything already runnable at this tick.
  TaskHandle start_child_task(Task<> task, std::string name = {});

  /// Runs `fn` at time `t` outside any task. Callbacks must not suspend.
  TimerId call_at(SimTime t, std::function<void()> fn);
  void cancel_timer(TimerId id);

  /// Callback invoked once, after the final event and after remaining tasks are cancelled.
  void on_sim_end(std::function<void()> callback);

  /// Executes events with wake time <= length, then leaves the clock at `length`.
  /// Rethrows the first exception that escapes a top-level task.
  void run(double length_seconds);

  bool is_running() const { return running_; }
  bool finished() const { return finished_; }

  /// Number of tasks currently executing. Time never advances while this is nonzero.
  int timer_lock() const { return timer_lock_; }

  class LockGuard {
   public:
    explicit LockGuard(Kernel& k) : kernel_(&k) { ++kernel_->timer_lock_; }
    ~LockGuard() {
      if (kernel_) --kernel_->timer_lock_;
    }
    LockGuard(const LockGuard&) = delete;
    LockGuard& operator=(const LockGuard&) = delete;

   private:
    Kernel* kernel_;
  };
  /// Holds the timer lock for the guard's lifetime (used while foreign code executes).
  LockGuard hold_timer_lock() { return LockGuard(*this); }

  /// Root generator seeded from SimConfig::seed.
  Rng& rng() { return rng_; }
  /// Independent stream derived from the seed and a label.
  Rng rng_stream(std::string_view label) const { return rng_.split(label); }

  /// Task currently executing, or null when called from a callback or outside the run loop.
  const std::shared_ptr<TaskControl>& current_task() const { return current_; }

  /// Schedules `h` to resume at `t` on behalf of the current task.
  void schedule(std::coroutine_handle<> h, SimTime t);
  /// Schedules `h` on behalf of an explicit owner (used when waking another task).
  void schedule_for(std::coroutine_handle<> h, std::shared_ptr<TaskControl> owner, SimTime t);

  std::size_t pending_events() const { return queue_.size(); }
  std::uint64_t dispatched_events() const { return dispatched_; }

 private:
  friend class TaskHandle;

  struct WakeEntry {
    SimTime wake_at;
    std::uint64_t seq = 0;
    std::coroutine_handle<> handle;
    std::shared_ptr<TaskControl> owner;
    std::function<void()> callback;
    TimerId timer = 0;
  };
  struct Later {
    bool operator()(const WakeEntry& a, const WakeEntry& b) const {
      if (a.wake_at != b.wake_at) return a.wake_at > b.wake_at;
      return a.seq > b.seq;
    }
  };

  TaskHandle spawn(Task<> task, std::string name);
  void push(WakeEntry entry);
  void dispatch(WakeEntry& entry);
  void retire(const std::shared_ptr<TaskControl>& control);
  void cancel_control(const std::shared_ptr<TaskControl>& control);
  void cancel_all();

  SimConfig config_;
  SimTime now_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_task_id_ = 0;
  TimerId next_timer_ = 1;
  std::uint64_t dispatched_ = 0;
  int timer_lock_ = 0;
  bool running_ = false;
  bool finished_ = false;

  std::priority_queue<WakeEntry, std::vector<WakeEntry>, Later> queue_;
  std::unordered_set<TimerId> cancelled_timers_;
  std::list<std::shared_ptr<TaskControl>> live_;
  std::shared_ptr<TaskControl> current_;
  std::vector<std::function<void()>> end_callbacks_;
  std::exception_ptr failure_;
  Rng rng_;
};

}  // namespace lorasim::sim
