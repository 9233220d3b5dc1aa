#include "lorasim/sim/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lorasim/errors.hpp"
#include "lorasim/log.hpp"

namespace lorasim::sim {

void SimConfig::validate() const {
  if (!(tick_duration > 0.0) || !std::isfinite(tick_duration)) {
    throw ArgumentError("tick_duration must be positive");
  }
  if (!(length >= 0.0) || !std::isfinite(length)) {
    throw ArgumentError("simulation length must be >= 0");
  }
}

bool TaskHandle::done() const {
  return !control_ || control_->finished;
}

bool TaskHandle::cancelled() const {
  return control_ && control_->cancelled;
}

void TaskHandle::cancel() {
  if (!control_ || control_->finished) {
    return;
  }
  if (kernel_->current_ == control_) {
    throw StateError("a task cannot cancel itself");
  }
  kernel_->cancel_control(control_);
}

Kernel::Kernel(SimConfig config) : config_(config), rng_(config.seed) { config_.validate(); }

Kernel::~Kernel() {
  // Frames may hold awaiters that point back into the kernel; destroy them while it is intact.
  cancel_all();
}

std::uint64_t Kernel::to_ticks(double seconds) const {
  if (!std::isfinite(seconds) || seconds < 0.0) {
    throw ArgumentError("duration must be a finite value >= 0");
  }
  double ticks = std::floor(seconds / config_.tick_duration + 0.5);
  if (ticks >= static_cast<double>(std::numeric_limits<std::uint64_t>::max())) {
    throw ArgumentError("duration overflows the tick counter");
  }
  return static_cast<std::uint64_t>(ticks);
}

Kernel::SleepAwaiter Kernel::sleep(double seconds) {
  if (!(seconds >= 0.0)) {
    throw ArgumentError("sleep duration must be >= 0");
  }
  return SleepAwaiter{this, now_ + to_ticks(seconds)};
}

Kernel::SleepAwaiter Kernel::sleep_until(SimTime t) {
  if (t < now_) {
    throw ArgumentError("sleep_until target " + std::to_string(t.ticks) + " lies before now " +
                        std::to_string(now_.ticks));
  }
  return SleepAwaiter{this, t};
}

TaskHandle Kernel::create_task(Task<> task, std::string name) {
  if (running_ || finished_) {
    throw StateError("root tasks must be registered before run()");
  }
  return spawn(std::move(task), std::move(name));
}

TaskHandle Kernel::start_child_task(Task<> task, std::string name) {
  if (finished_) {
    throw StateError("cannot start a task after the simulation ended");
  }
  return spawn(std::move(task), std::move(name));
}

TaskHandle Kernel::spawn(Task<> task, std::string name) {
  if (!task.valid()) {
    throw ArgumentError("empty task");
  }
  auto control = std::make_shared<TaskControl>();
  control->id = next_task_id_++;
  control->name = name.empty() ? "task-" + std::to_string(control->id) : std::move(name);
  auto handle = task.handle();
  control->task = std::move(task);
  live_.push_back(control);
  push(WakeEntry{now_, 0, handle, control, {}, 0});
  return TaskHandle(this, control);
}

TimerId Kernel::call_at(SimTime t, std::function<void()> fn) {
  if (t < now_) {
    throw ArgumentError("call_at target lies in the past");
  }
  TimerId id = next_timer_++;
  push(WakeEntry{t, 0, {}, nullptr, std::move(fn), id});
  return id;
}

void Kernel::cancel_timer(TimerId id) {
  if (id != 0) {
    cancelled_timers_.insert(id);
  }
}

void Kernel::on_sim_end(std::function<void()> callback) { end_callbacks_.push_back(std::move(callback)); }

void Kernel::schedule(std::coroutine_handle<> h, SimTime t) {
  if (!current_) {
    throw StateError("suspending kernel operations must be awaited from inside a task");
  }
  schedule_for(h, current_, t);
}

void Kernel::schedule_for(std::coroutine_handle<> h, std::shared_ptr<TaskControl> owner, SimTime t) {
  push(WakeEntry{std::max(t, now_), 0, h, std::move(owner), {}, 0});
}

void Kernel::push(WakeEntry entry) {
  entry.seq = next_seq_++;
  queue_.push(std::move(entry));
}

void Kernel::run(double length_seconds) {
  if (running_) {
    throw StateError("run() is not reentrant");
  }
  if (finished_) {
    throw StateError("this kernel has already completed a run");
  }
  if (!(length_seconds >= 0.0)) {
    throw ArgumentError("simulation length must be >= 0");
  }
  const SimTime end{to_ticks(length_seconds)};
  auto logger = log::get("kernel");
  logger->debug("run start, length {} s ({} ticks)", length_seconds, end.ticks);

  running_ = true;
  while (!queue_.empty() && !failure_) {
    if (queue_.top().wake_at > end) {
      break;
    }
    WakeEntry entry = queue_.top();
    queue_.pop();
    if (entry.timer != 0) {
      if (auto it = cancelled_timers_.find(entry.timer); it != cancelled_timers_.end()) {
        cancelled_timers_.erase(it);
        continue;
      }
    }
    if (entry.wake_at != now_) {
      // Only reachable with no task mid-execution: every resumption has returned.
      if (timer_lock_ != 0) {
        throw StateError("virtual time advance attempted while the timer lock is held");
      }
      now_ = entry.wake_at;
    }
    dispatch(entry);
  }
  if (!failure_) now_ = std::max(now_, end);
  running_ = false;
  finished_ = true;

  cancel_all();
  if (failure_) {
    logger->error("run aborted at {:.9g} s", now_seconds());
    std::rethrow_exception(failure_);
  }
  logger->debug("run complete at {:.9g} s after {} events", now_seconds(), dispatched_);
  auto callbacks = std::move(end_callbacks_);
  end_callbacks_.clear();
  for (auto& cb : callbacks) {
    cb();
  }
}

void Kernel::dispatch(WakeEntry& entry) {
  ++dispatched_;
  if (entry.callback) {
    LockGuard lock(*this);
    try {
      entry.callback();
    } catch (...) {
      failure_ = std::current_exception();
    }
    return;
  }
  auto control = entry.owner;
  if (!control || control->finished) {
    return;
  }
  current_ = control;
  {
    LockGuard lock(*this);
    entry.handle.resume();
  }
  current_.reset();
  if (control->task.done()) {
    try {
      control->task.rethrow_if_failed();
    } catch (...) {
      if (!failure_) {
        failure_ = std::current_exception();
      }
    }
    retire(control);
  }
}

void Kernel::retire(const std::shared_ptr<TaskControl>& control) {
  control->finished = true;
  control->task.reset();
  live_.remove(control);
}

void Kernel::cancel_control(const std::shared_ptr<TaskControl>& control) {
  control->cancelled = true;
  retire(control);
}

void Kernel::cancel_all() {
  // Newest first, so children unwind before the tasks that spawned them.
  while (!live_.empty()) {
    auto control = live_.back();
    cancel_control(control);
  }
}

}  // namespace lorasim::sim
