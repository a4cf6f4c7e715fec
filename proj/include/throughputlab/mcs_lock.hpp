#pragma once

// MCS queue lock. Each waiter spins on the `locked` flag of its own queue
// node; the holder hands the lock over by clearing its successor's flag, so
// grants follow the order in which workers swapped themselves into `tail`.

#include <atomic>
#include <new>

#include "throughputlab/spin.hpp"

namespace tlab {

class McsLock {
 public:
  // One per worker. A node may be reused for the next acquisition once the
  // previous release has returned; it must not be enqueued twice at once.
  struct alignas(64) Node {
    std::atomic<bool> locked{false};
    std::atomic<Node*> next{nullptr};
  };

  enum class ReleasePath {
    Uncontended,         // no successor; tail CAS'd back to null
    Handover,            // successor already linked
    WaitedForSuccessor,  // tail CAS failed, waited for the successor to link
  };

  McsLock() = default;
  McsLock(const McsLock&) = delete;
  McsLock& operator=(const McsLock&) = delete;

  void lock(Node& node) noexcept {
    lock(node, [](Node*) noexcept {});
  }

  // `on_enqueued(pred)` runs right after the swap into tail, before linking
  // behind pred. Tests use it to observe queue order and to force schedules.
  template <typename OnEnqueued>
  void lock(Node& node, OnEnqueued&& on_enqueued) {
    node.next.store(nullptr, std::memory_order_relaxed);
    node.locked.store(true, std::memory_order_relaxed);
    Node* pred = tail_.exchange(&node, std::memory_order_acq_rel);
    on_enqueued(pred);
    if (pred == nullptr) return;
    pred->next.store(&node, std::memory_order_release);
    Backoff backoff;
    while (node.locked.load(std::memory_order_acquire)) backoff.pause();
  }

  ReleasePath unlock(Node& node) noexcept {
    Node* succ = node.next.load(std::memory_order_acquire);
    ReleasePath path = ReleasePath::Handover;
    if (succ == nullptr) {
      Node* expected = &node;
      if (tail_.compare_exchange_strong(expected, nullptr, std::memory_order_acq_rel,
                                        std::memory_order_acquire)) {
        return ReleasePath::Uncontended;
      }
      Backoff backoff;
      while ((succ = node.next.load(std::memory_order_acquire)) == nullptr) backoff.pause();
      path = ReleasePath::WaitedForSuccessor;
    }
    succ->locked.store(false, std::memory_order_release);
    return path;
  }

  bool is_locked() const noexcept { return tail_.load(std::memory_order_acquire) != nullptr; }

 private:
  alignas(64) std::atomic<Node*> tail_{nullptr};
};

// Scoped ownership: holding one of these is the evidence that the lock is held.
class [[nodiscard]] McsGuard {
 public:
  McsGuard(McsLock& lock, McsLock::Node& node) noexcept : lock_(&lock), node_(&node) {
    lock_->lock(*node_);
  }
  McsGuard(const McsGuard&) = delete;
  McsGuard& operator=(const McsGuard&) = delete;
  ~McsGuard() { lock_->unlock(*node_); }

 private:
  McsLock* lock_;
  McsLock::Node* node_;
};

}  // namespace tlab
