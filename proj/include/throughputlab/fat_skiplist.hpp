#pragma once

// Concurrent ordered set of integers built as a skip list whose bottom-level
// nodes each hold up to K sorted keys inline ("fat" nodes). K = 1 is an
// ordinary lock-based skip-list set and serves as the comparison baseline.
//
// Bottom level
//   Every node owns an immutable lower bound `low` and is responsible for the
//   half-open key range [low, next->low). The head sentinel holds no keys and
//   covers everything below the first node. Node contents (keys, count, next,
//   deleted) change only under the node's lock and inside a seqlock write
//   section, so contains() reads a node optimistically without locking.
//
//   insert: lock the responsible node; if it is full, merge the new key into
//           its K keys and split at the median, publishing the upper half as
//           a new node after it.
//   remove: lock the responsible node and erase. Removing a node's last key
//           relocks predecessor then node (ascending key order) and unlinks
//           the node while both are held, so a linked node is never empty
//           outside its lock.
//
// Index levels
//   One tower per node with geometric height (p = 1/2, capped at 32). Towers
//   are linked after the bottom-level change commits and unlinked after a node
//   leaves the bottom level, each level under the predecessor's index lock.
//   Searches use the index only as a hint and always finish at the bottom
//   level, so a stale index costs time, never correctness.
//
// Unlinked nodes are kept on a retired list until the set is destroyed;
// readers may still hold pointers to them.

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "throughputlab/spin.hpp"

namespace tlab {

struct AuditReport {
  bool ok = true;
  std::size_t nodes = 0;  // bottom-level nodes, head sentinel excluded
  std::size_t keys = 0;
  std::vector<std::string> violations;

  void fail(std::string what) {
    ok = false;
    if (violations.size() < 32) violations.push_back(std::move(what));
  }
};

template <typename Key = std::int64_t, std::size_t K = 32>
class FatNodeSkipListSet {
  static_assert(std::is_integral_v<Key>, "keys are machine integers stored inline");
  static_assert(K >= 1, "node capacity must be at least 1");

 public:
  using key_type = Key;
  static constexpr std::size_t kCapacity = K;
  static constexpr int kMaxHeight = 32;

  FatNodeSkipListSet() : head_(new Node(std::numeric_limits<Key>::min(), kMaxHeight)) {
    head_->fully_linked.store(true, std::memory_order_relaxed);
  }

  FatNodeSkipListSet(const FatNodeSkipListSet&) = delete;
  FatNodeSkipListSet& operator=(const FatNodeSkipListSet&) = delete;

  ~FatNodeSkipListSet() {
    Node* n = head_;
    while (n != nullptr) {
      Node* next = n->next.load(std::memory_order_relaxed);
      delete n;
      n = next;
    }
    for (Node* r : retired_) delete r;
  }

  bool insert(Key x) {
    for (;;) {
      Node* n = locate(x);
      n->lock.lock();
      if (!responsible(n, x)) {
        n->lock.unlock();
        continue;
      }
      if (n == head_) {
        Node* fresh = new Node(x, random_height());
        fresh->keys[0].store(x, std::memory_order_relaxed);
        fresh->count.store(1, std::memory_order_relaxed);
        fresh->next.store(head_->next.load(std::memory_order_relaxed), std::memory_order_relaxed);
        const auto v = write_begin(head_);
        head_->next.store(fresh, std::memory_order_release);
        write_end(head_, v);
        head_->lock.unlock();
        link_index(fresh);
        return true;
      }
      const std::size_t cnt = n->count.load(std::memory_order_relaxed);
      const std::size_t pos = lower_bound(n, cnt, x);
      if (pos < cnt && key_at(n, pos) == x) {
        n->lock.unlock();
        return false;
      }
      if (cnt < K) {
        const auto v = write_begin(n);
        for (std::size_t i = cnt; i > pos; --i) {
          n->keys[i].store(key_at(n, i - 1), std::memory_order_relaxed);
        }
        n->keys[pos].store(x, std::memory_order_relaxed);
        n->count.store(static_cast<std::uint32_t>(cnt + 1), std::memory_order_relaxed);
        write_end(n, v);
        n->lock.unlock();
        return true;
      }
      Node* upper = split_insert(n, pos, x);
      n->lock.unlock();
      link_index(upper);
      return true;
    }
  }

  bool remove(Key x) {
    for (;;) {
      Node* n = locate(x);
      n->lock.lock();
      if (!responsible(n, x)) {
        n->lock.unlock();
        continue;
      }
      if (n == head_) {
        n->lock.unlock();
        return false;
      }
      const std::size_t cnt = n->count.load(std::memory_order_relaxed);
      const std::size_t pos = lower_bound(n, cnt, x);
      if (pos == cnt || key_at(n, pos) != x) {
        n->lock.unlock();
        return false;
      }
      if (cnt > 1) {
        erase_at(n, cnt, pos);
        n->lock.unlock();
        return true;
      }
      n->lock.unlock();
      const RemoveOutcome outcome = remove_last(n, x);
      if (outcome != RemoveOutcome::Retry) return outcome == RemoveOutcome::Removed;
    }
  }

  bool contains(Key x) const {
    for (;;) {
      const Node* n = locate(x);
      for (;;) {
        const Snapshot s = read(n, x);
        if (s.deleted) break;  // fell off the list; search again
        if (s.next != nullptr && s.next->low <= x) {
          n = s.next;
          continue;
        }
        return s.found;
      }
    }
  }

  // ---- quiescent-only inspection -------------------------------------

  std::vector<Key> keys_quiescent() const {
    std::vector<Key> out;
    for (const Node* n = first(); n != nullptr; n = n->next.load(std::memory_order_acquire)) {
      const std::size_t cnt = n->count.load(std::memory_order_relaxed);
      for (std::size_t i = 0; i < cnt; ++i) out.push_back(key_at(n, i));
    }
    return out;
  }

  std::vector<std::size_t> occupancies_quiescent() const {
    std::vector<std::size_t> out;
    for (const Node* n = first(); n != nullptr; n = n->next.load(std::memory_order_acquire)) {
      out.push_back(n->count.load(std::memory_order_relaxed));
    }
    return out;
  }

  std::size_t size_quiescent() const {
    std::size_t total = 0;
    for (std::size_t c : occupancies_quiescent()) total += c;
    return total;
  }

  // Checks ordering, occupancy, range ownership and index consistency.
  // Requires that no operation is in flight.
  AuditReport audit() const {
    AuditReport report;
    if (head_->count.load(std::memory_order_relaxed) != 0) report.fail("head sentinel holds keys");
    std::vector<const Node*> bottom;
    bool have_prev_key = false;
    Key prev_key{};
    const Node* prev = nullptr;
    for (const Node* n = first(); n != nullptr; n = n->next.load(std::memory_order_acquire)) {
      bottom.push_back(n);
      ++report.nodes;
      const std::string where = "node[low=" + std::to_string(n->low) + "]";
      const std::size_t cnt = n->count.load(std::memory_order_relaxed);
      if (n->deleted.load(std::memory_order_relaxed)) report.fail(where + " is marked deleted");
      if (cnt < 1 || cnt > K) report.fail(where + " occupancy " + std::to_string(cnt));
      if (prev != nullptr && !(prev->low < n->low)) report.fail(where + " low not increasing");
      const Node* next = n->next.load(std::memory_order_acquire);
      for (std::size_t i = 0; i < std::min(cnt, K); ++i) {
        const Key k = key_at(n, i);
        if (have_prev_key && !(prev_key < k)) {
          report.fail(where + " key " + std::to_string(k) + " not strictly increasing");
        }
        if (k < n->low) report.fail(where + " key " + std::to_string(k) + " below node bound");
        if (next != nullptr && !(k < next->low)) {
          report.fail(where + " key " + std::to_string(k) + " beyond next node bound");
        }
        prev_key = k;
        have_prev_key = true;
        ++report.keys;
      }
      prev = n;
    }
    for (int level = 1; level < kMaxHeight; ++level) {
      std::vector<const Node*> expected;
      for (const Node* n : bottom) {
        if (n->height > level) expected.push_back(n);
      }
      std::vector<const Node*> linked;
      for (const Node* n = head_->link(level).load(std::memory_order_acquire); n != nullptr;
           n = n->link(level).load(std::memory_order_acquire)) {
        linked.push_back(n);
        if (linked.size() > bottom.size() + 1) break;
      }
      if (linked != expected) {
        report.fail("index level " + std::to_string(level) + " lists " +
                    std::to_string(linked.size()) + " nodes, expected " +
                    std::to_string(expected.size()));
      }
    }
    return report;
  }

 private:
  struct Node {
    Node(Key lower, int h)
        : low(lower), height(h), up(h > 1 ? new std::atomic<Node*>[h - 1] : nullptr) {
      for (int i = 0; i + 1 < h; ++i) up[i].store(nullptr, std::memory_order_relaxed);
      for (auto& k : keys) k.store(Key{}, std::memory_order_relaxed);
    }

    std::atomic<Node*>& link(int level) { return level == 0 ? next : up[level - 1]; }
    const std::atomic<Node*>& link(int level) const { return level == 0 ? next : up[level - 1]; }

    const Key low;
    const int height;
    std::atomic<std::uint64_t> version{0};
    std::atomic<std::uint32_t> count{0};
    std::atomic<bool> deleted{false};
    SpinLock lock;
    std::atomic<Node*> next{nullptr};
    std::array<std::atomic<Key>, K> keys;

    SpinLock index_lock;
    std::atomic<bool> index_marked{false};
    std::atomic<bool> fully_linked{false};
    std::unique_ptr<std::atomic<Node*>[]> up;
  };

  struct Snapshot {
    bool deleted;
    const Node* next;
    bool found;
  };

  enum class RemoveOutcome { Removed, Absent, Retry };

  static Key key_at(const Node* n, std::size_t i) {
    return n->keys[i].load(std::memory_order_relaxed);
  }

  static std::size_t lower_bound(const Node* n, std::size_t cnt, Key x) {
    std::size_t lo = 0;
    std::size_t hi = cnt;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (key_at(n, mid) < x) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    return lo;
  }

  static std::uint64_t write_begin(Node* n) {
    const std::uint64_t v = n->version.load(std::memory_order_relaxed);
    n->version.store(v + 1, std::memory_order_relaxed);
    std::atomic_thread_fence(std::memory_order_release);
    return v;
  }

  static void write_end(Node* n, std::uint64_t v) {
    n->version.store(v + 2, std::memory_order_release);
  }

  static Snapshot read(const Node* n, Key x) {
    Backoff backoff;
    for (;;) {
      const std::uint64_t v = n->version.load(std::memory_order_acquire);
      if ((v & 1) == 0) {
        const bool deleted = n->deleted.load(std::memory_order_relaxed);
        const Node* next = n->next.load(std::memory_order_relaxed);
        const std::size_t cnt = std::min<std::size_t>(n->count.load(std::memory_order_relaxed), K);
        const std::size_t pos = lower_bound(n, cnt, x);
        const bool found = pos < cnt && key_at(n, pos) == x;
        std::atomic_thread_fence(std::memory_order_acquire);
        if (n->version.load(std::memory_order_relaxed) == v) return {deleted, next, found};
      }
      backoff.pause();
    }
  }

  // Caller holds n->lock.
  bool responsible(const Node* n, Key x) const {
    if (n->deleted.load(std::memory_order_relaxed)) return false;
    const Node* next = n->next.load(std::memory_order_relaxed);
    return next == nullptr || x < next->low;
  }

  const Node* first() const { return head_->next.load(std::memory_order_acquire); }

  static void erase_at(Node* n, std::size_t cnt, std::size_t pos) {
    const auto v = write_begin(n);
    for (std::size_t i = pos; i + 1 < cnt; ++i) {
      n->keys[i].store(key_at(n, i + 1), std::memory_order_relaxed);
    }
    n->count.store(static_cast<std::uint32_t>(cnt - 1), std::memory_order_relaxed);
    write_end(n, v);
  }

  // n is full and locked. Left keeps ceil(K/2) of the K+1 keys, the new
  // upper node gets floor(K/2)+1.
  Node* split_insert(Node* n, std::size_t pos, Key x) {
    std::array<Key, K + 1> merged;
    for (std::size_t i = 0, j = 0; i <= K; ++i) {
      merged[i] = i == pos ? x : key_at(n, j++);
    }
    constexpr std::size_t left = (K + 1) / 2;
    constexpr std::size_t right = K + 1 - left;
    Node* upper = new Node(merged[left], random_height());
    for (std::size_t i = 0; i < right; ++i) {
      upper->keys[i].store(merged[left + i], std::memory_order_relaxed);
    }
    upper->count.store(static_cast<std::uint32_t>(right), std::memory_order_relaxed);
    upper->next.store(n->next.load(std::memory_order_relaxed), std::memory_order_relaxed);

    const auto v = write_begin(n);
    for (std::size_t i = 0; i < left; ++i) n->keys[i].store(merged[i], std::memory_order_relaxed);
    n->count.store(static_cast<std::uint32_t>(left), std::memory_order_relaxed);
    n->next.store(upper, std::memory_order_release);
    write_end(n, v);
    return upper;
  }

  // x was the only key of n when last seen. Lock predecessor then n, re-check,
  // and unlink n if it is about to become empty.
  RemoveOutcome remove_last(Node* n, Key x) {
    for (;;) {
      Node* pred = locate_before(n->low);
      pred->lock.lock();
      if (pred->deleted.load(std::memory_order_relaxed) ||
          pred->next.load(std::memory_order_relaxed) != n) {
        pred->lock.unlock();
        if (n->deleted.load(std::memory_order_acquire)) return RemoveOutcome::Retry;
        std::this_thread::yield();
        continue;
      }
      n->lock.lock();
      if (!responsible(n, x)) {
        n->lock.unlock();
        pred->lock.unlock();
        return RemoveOutcome::Retry;
      }
      const std::size_t cnt = n->count.load(std::memory_order_relaxed);
      const std::size_t pos = lower_bound(n, cnt, x);
      if (pos == cnt || key_at(n, pos) != x) {
        n->lock.unlock();
        pred->lock.unlock();
        return RemoveOutcome::Absent;
      }
      if (cnt > 1) {
        erase_at(n, cnt, pos);
        n->lock.unlock();
        pred->lock.unlock();
        return RemoveOutcome::Removed;
      }
      const auto pv = write_begin(pred);
      const auto nv = write_begin(n);
      n->count.store(0, std::memory_order_relaxed);
      n->deleted.store(true, std::memory_order_relaxed);
      pred->next.store(n->next.load(std::memory_order_relaxed), std::memory_order_release);
      write_end(n, nv);
      write_end(pred, pv);
      n->lock.unlock();
      pred->lock.unlock();
      unlink_index(n);
      retire(n);
      return RemoveOutcome::Removed;
    }
  }

  // Last node whose bound satisfies `before(bound)`, reached through the
  // index (never stepping onto a node already unlinked from the bottom level)
  // and then the bottom level.
  template <typename Before>
  Node* descend(Before before) const {
    Node* cur = head_;
    for (int level = top_level_.load(std::memory_order_acquire) - 1; level >= 1; --level) {
      for (;;) {
        Node* nxt = cur->link(level).load(std::memory_order_acquire);
        if (nxt == nullptr || !before(nxt->low) || nxt->deleted.load(std::memory_order_acquire)) {
          break;
        }
        cur = nxt;
      }
    }
    for (;;) {
      Node* nxt = cur->next.load(std::memory_order_acquire);
      if (nxt == nullptr || !before(nxt->low)) return cur;
      cur = nxt;
    }
  }

  Node* locate(Key x) const {
    return descend([x](Key low) { return low <= x; });
  }

  Node* locate_before(Key bound) const {
    return descend([bound](Key low) { return low < bound; });
  }

  // Predecessor of a tower with bound `low` at `level`: the last node with a
  // strictly smaller bound, following every link including ones being removed.
  Node* index_pred(Key low, int level) const {
    Node* cur = head_;
    for (int l = top_level_.load(std::memory_order_acquire) - 1; l >= level; --l) {
      for (;;) {
        Node* nxt = cur->link(l).load(std::memory_order_acquire);
        if (nxt == nullptr || !(nxt->low < low)) break;
        cur = nxt;
      }
    }
    return cur;
  }

  void link_index(Node* n) {
    raise_top_level(n->height);
    for (int level = 1; level < n->height; ++level) {
      for (;;) {
        Node* pred = index_pred(n->low, level);
        Node* succ = pred->link(level).load(std::memory_order_acquire);
        pred->index_lock.lock();
        const bool ok = !pred->index_marked.load(std::memory_order_relaxed) &&
                        pred->link(level).load(std::memory_order_relaxed) == succ &&
                        (succ == nullptr || !(succ->low < n->low));
        if (ok) {
          n->link(level).store(succ, std::memory_order_relaxed);
          pred->link(level).store(n, std::memory_order_release);
        }
        pred->index_lock.unlock();
        if (ok) break;
        std::this_thread::yield();
      }
    }
    n->fully_linked.store(true, std::memory_order_release);
  }

  void unlink_index(Node* n) {
    if (n->height == 1) return;
    while (!n->fully_linked.load(std::memory_order_acquire)) std::this_thread::yield();
    n->index_lock.lock();
    n->index_marked.store(true, std::memory_order_relaxed);
    n->index_lock.unlock();
    for (int level = n->height - 1; level >= 1; --level) {
      for (;;) {
        Node* pred = index_pred(n->low, level);
        Node* cur = pred->link(level).load(std::memory_order_acquire);
        // Skip towers that share n's bound (an old unlinked node, or a newer one).
        while (cur != nullptr && cur != n && !(n->low < cur->low)) {
          pred = cur;
          cur = cur->link(level).load(std::memory_order_acquire);
        }
        if (cur != n) break;
        pred->index_lock.lock();
        const bool ok = !pred->index_marked.load(std::memory_order_relaxed) &&
                        pred->link(level).load(std::memory_order_relaxed) == n;
        if (ok) {
          pred->link(level).store(n->link(level).load(std::memory_order_relaxed),
                                  std::memory_order_release);
        }
        pred->index_lock.unlock();
        if (ok) break;
        std::this_thread::yield();
      }
    }
  }

  void raise_top_level(int h) {
    int cur = top_level_.load(std::memory_order_relaxed);
    while (cur < h && !top_level_.compare_exchange_weak(cur, h, std::memory_order_acq_rel)) {
    }
  }

  void retire(Node* n) {
    // TODO: epoch-based reclamation; long delete-heavy runs keep every unlinked node alive.
    std::lock_guard<std::mutex> guard(retire_mu_);
    retired_.push_back(n);
  }

  static int random_height() {
    thread_local std::mt19937_64 rng(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    const int h = 1 + std::countr_zero(rng() | (std::uint64_t{1} << (kMaxHeight - 1)));
    return std::min(h, kMaxHeight);
  }

  Node* head_;
  std::atomic<int> top_level_{1};
  std::mutex retire_mu_;
  std::vector<Node*> retired_;
};

}  // namespace tlab
