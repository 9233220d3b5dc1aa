#pragma once

#include <coroutine>
#include <deque>
#include <list>
#include <memory>
#include <optional>
#include <utility>

#include "lorasim/errors.hpp"
#include "lorasim/sim/kernel.hpp"

namespace lorasim::sim {

/// FIFO whose consumers block in virtual time. A put hands the item to the oldest blocked
/// consumer, which resumes at the current tick.
template <typename T>
class SimQueue {
 public:
  explicit SimQueue(Kernel& kernel) : kernel_(&kernel) {}
  SimQueue(const SimQueue&) = delete;
  SimQueue& operator=(const SimQueue&) = delete;

  ~SimQueue() {
    for (auto* w : waiters_) {
      w->queue = nullptr;
    }
  }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t waiting() const { return waiters_.size(); }

  void put(T item) {
    while (!waiters_.empty()) {
      Waiter* w = waiters_.front();
      waiters_.pop_front();
      w->linked = false;
      if (w->owner && w->owner->finished) {
        continue;
      }
      w->slot.emplace(std::move(item));
      w->wake();
      return;
    }
    items_.push_back(std::move(item));
  }

  std::optional<T> try_get() {
    if (items_.empty()) {
      return std::nullopt;
    }
    T item = std::move(items_.front());
    items_.pop_front();
    return item;
  }

 private:
  struct Waiter {
    SimQueue* queue = nullptr;
    std::coroutine_handle<> handle;
    std::shared_ptr<TaskControl> owner;
    std::optional<T> slot;
    TimerId timer = 0;
    bool linked = false;
    typename std::list<Waiter*>::iterator pos;

    void wake() {
      if (timer != 0) {
        queue->kernel_->cancel_timer(timer);
        timer = 0;
      }
      queue->kernel_->schedule_for(handle, owner, queue->kernel_->now());
    }
    void unlink() {
      if (linked && queue) {
        queue->waiters_.erase(pos);
        linked = false;
      }
      if (timer != 0 && queue) {
        queue->kernel_->cancel_timer(timer);
        timer = 0;
      }
    }
  };

  template <bool Timed>
  class GetAwaiter {
   public:
    GetAwaiter(SimQueue* q, std::optional<SimTime> deadline) : deadline_(deadline) { waiter_.queue = q; }
    GetAwaiter(const GetAwaiter&) = delete;
    GetAwaiter& operator=(const GetAwaiter&) = delete;
    ~GetAwaiter() { waiter_.unlink(); }

    bool await_ready() {
      SimQueue* q = waiter_.queue;
      if (!q->items_.empty()) {
        waiter_.slot.emplace(std::move(q->items_.front()));
        q->items_.pop_front();
        return true;
      }
      if (q->kernel_->finished()) {
        throw SimulationEnded();
      }
      return false;
    }

    void await_suspend(std::coroutine_handle<> h) {
      SimQueue* q = waiter_.queue;
      Kernel* k = q->kernel_;
      if (!k->current_task()) {
        throw StateError("queue get must be awaited from inside a task");
      }
      waiter_.handle = h;
      waiter_.owner = k->current_task();
      waiter_.pos = q->waiters_.insert(q->waiters_.end(), &waiter_);
      waiter_.linked = true;
      if (deadline_) {
        Waiter* w = &waiter_;
        waiter_.timer = k->call_at(*deadline_, [w] {
          w->timer = 0;
          w->unlink();
          w->queue->kernel_->schedule_for(w->handle, w->owner, w->queue->kernel_->now());
        });
      }
    }

    auto await_resume() {
      if constexpr (Timed) {
        return std::move(waiter_.slot);
      } else {
        if (!waiter_.slot) {
          throw SimulationEnded();
        }
        return std::move(*waiter_.slot);
      }
    }

   private:
    Waiter waiter_;
    std::optional<SimTime> deadline_;
  };

 public:
  /// Blocks until an item is available.
  [[nodiscard]] GetAwaiter<false> get() { return GetAwaiter<false>(this, std::nullopt); }
  /// Blocks until an item is available or virtual time reaches `deadline` (nullopt result).
  [[nodiscard]] GetAwaiter<true> get_until(SimTime deadline) {
    return GetAwaiter<true>(this, std::max(deadline, kernel_->now()));
  }
  [[nodiscard]] GetAwaiter<true> get_for(double timeout_seconds) {
    return get_until(kernel_->now() + kernel_->to_ticks(timeout_seconds));
  }

 private:
  Kernel* kernel_;
  std::deque<T> items_;
  std::list<Waiter*> waiters_;
};

}  // namespace lorasim::sim
