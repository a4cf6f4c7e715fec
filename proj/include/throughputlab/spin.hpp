#pragma once

#include <atomic>
#include <cstdint>
#include <thread>

namespace tlab {

inline void cpu_relax() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_ia32_pause();
#elif defined(__aarch64__)
  asm volatile("yield" ::: "memory");
#endif
}

// Exactly `iterations` loop trips of an empty body the optimizer must keep.
// This is the unit of "C" and "P" in the benchmarks.
inline void spin_work(std::uint64_t iterations) noexcept {
  for (std::uint64_t i = 0; i < iterations; ++i) {
    asm volatile("" : "+r"(i));
  }
}

// Spin briefly, then start yielding the CPU. Waiters in the locks below use
// this so oversubscribed runs (more workers than cores) still make progress.
class Backoff {
 public:
  void pause() noexcept {
    if (count_ < kSpinLimit) {
      for (std::uint32_t i = 0; i < (1u << count_); ++i) cpu_relax();
      ++count_;
    } else {
      std::this_thread::yield();
    }
  }

  void reset() noexcept { count_ = 0; }

 private:
  static constexpr std::uint32_t kSpinLimit = 6;
  std::uint32_t count_ = 0;
};

// Test-and-test-and-set lock, one byte of state.
class SpinLock {
 public:
  void lock() noexcept {
    Backoff backoff;
    for (;;) {
      if (!locked_.exchange(true, std::memory_order_acquire)) return;
      while (locked_.load(std::memory_order_relaxed)) backoff.pause();
    }
  }

  bool try_lock() noexcept {
    return !locked_.load(std::memory_order_relaxed) &&
           !locked_.exchange(true, std::memory_order_acquire);
  }

  void unlock() noexcept { locked_.store(false, std::memory_order_release); }

 private:
  std::atomic<bool> locked_{false};
};

}  // namespace tlab
