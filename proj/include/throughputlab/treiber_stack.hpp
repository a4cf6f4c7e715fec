#pragma once

// Lock-free Treiber stack.
//
// Nodes live in chunked, type-stable storage owned by the stack and are
// addressed by 32-bit index. The head word packs {index, stamp}; every
// successful CAS bumps the stamp, so a CAS prepared against a head that has
// since been popped and re-pushed (ABA) fails. Popped nodes go to an
// internal free list built the same way and are only returned to the system
// when the stack is destroyed, so reading a stale node's `next` is always a
// read of valid memory.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <new>
#include <optional>
#include <utility>

namespace tlab {

template <typename T>
class TreiberStack {
 public:
  TreiberStack() : chunks_(new std::atomic<Node*>[kMaxChunks]) {
    for (std::size_t i = 0; i < kMaxChunks; ++i) chunks_[i].store(nullptr, std::memory_order_relaxed);
  }

  TreiberStack(const TreiberStack&) = delete;
  TreiberStack& operator=(const TreiberStack&) = delete;

  ~TreiberStack() {
    for (std::size_t i = 0; i < kMaxChunks; ++i) delete[] chunks_[i].load(std::memory_order_relaxed);
  }

  void push(T value) {
    const std::uint32_t idx = allocate();
    node(idx).value = std::move(value);
    push_index(head_, idx);
  }

  // std::nullopt when the stack was empty at the linearization point.
  std::optional<T> pop() {
    const std::uint32_t idx = pop_index(head_);
    if (idx == kNil) return std::nullopt;
    std::optional<T> out(std::move(node(idx).value));
    push_index(free_, idx);
    return out;
  }

  bool empty() const noexcept { return index_of(head_.load(std::memory_order_acquire)) == kNil; }

  // Walks the chain; only meaningful when no operation is in flight.
  std::size_t size_quiescent() const {
    std::size_t n = 0;
    for (std::uint32_t i = index_of(head_.load(std::memory_order_acquire)); i != kNil;
         i = node(i).next.load(std::memory_order_relaxed)) {
      ++n;
    }
    return n;
  }

 private:
  static constexpr std::uint32_t kNil = 0xFFFFFFFFu;
  static constexpr unsigned kChunkBits = 16;
  static constexpr std::size_t kChunkSize = std::size_t{1} << kChunkBits;
  static constexpr std::size_t kMaxChunks = std::size_t{1} << (32 - kChunkBits);

  struct Node {
    T value{};
    std::atomic<std::uint32_t> next{kNil};
  };

  static constexpr std::uint64_t pack(std::uint32_t index, std::uint32_t stamp) noexcept {
    return (std::uint64_t{stamp} << 32) | index;
  }
  static constexpr std::uint32_t index_of(std::uint64_t word) noexcept {
    return static_cast<std::uint32_t>(word);
  }
  static constexpr std::uint32_t stamp_of(std::uint64_t word) noexcept {
    return static_cast<std::uint32_t>(word >> 32);
  }

  Node& node(std::uint32_t idx) const noexcept {
    return chunks_[idx >> kChunkBits].load(std::memory_order_acquire)[idx & (kChunkSize - 1)];
  }

  void push_index(std::atomic<std::uint64_t>& head, std::uint32_t idx) noexcept {
    std::uint64_t h = head.load(std::memory_order_relaxed);
    for (;;) {
      node(idx).next.store(index_of(h), std::memory_order_relaxed);
      if (head.compare_exchange_weak(h, pack(idx, stamp_of(h) + 1), std::memory_order_release,
                                     std::memory_order_relaxed)) {
        return;
      }
    }
  }

  std::uint32_t pop_index(std::atomic<std::uint64_t>& head) noexcept {
    std::uint64_t h = head.load(std::memory_order_acquire);
    for (;;) {
      const std::uint32_t idx = index_of(h);
      if (idx == kNil) return kNil;
      // May be stale if idx was popped and reused meanwhile; the stamp check rejects it.
      const std::uint32_t next = node(idx).next.load(std::memory_order_relaxed);
      if (head.compare_exchange_weak(h, pack(next, stamp_of(h) + 1), std::memory_order_acq_rel,
                                     std::memory_order_acquire)) {
        return idx;
      }
    }
  }

  std::uint32_t allocate() {
    const std::uint32_t recycled = pop_index(free_);
    if (recycled != kNil) return recycled;
    const std::uint64_t next_fresh = fresh_.fetch_add(1, std::memory_order_relaxed);
    if (next_fresh >= kNil) throw std::bad_alloc();
    const auto idx = static_cast<std::uint32_t>(next_fresh);
    auto& slot = chunks_[idx >> kChunkBits];
    if (slot.load(std::memory_order_acquire) == nullptr) {
      auto chunk = std::make_unique<Node[]>(kChunkSize);
      Node* expected = nullptr;
      if (slot.compare_exchange_strong(expected, chunk.get(), std::memory_order_acq_rel)) {
        chunk.release();
      }
    }
    return idx;
  }

  alignas(64) std::atomic<std::uint64_t> head_{pack(kNil, 0)};
  alignas(64) std::atomic<std::uint64_t> free_{pack(kNil, 0)};
  alignas(64) std::atomic<std::uint64_t> fresh_{0};
  std::unique_ptr<std::atomic<Node*>[]> chunks_;
};

}  // namespace tlab
