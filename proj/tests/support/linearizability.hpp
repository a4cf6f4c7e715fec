#pragma once

// Brute-force linearizability check for tiny histories. Tries every total
// order that respects real time (a call that returned before another was
// invoked must come first) and accepts if one of them replays against the
// sequential model with identical results.

#include <atomic>
#include <cstdint>
#include <optional>
#include <thread>
#include <tuple>
#include <vector>

namespace tlab::testing {

struct Call {
  int thread = 0;
  int op = 0;
  std::int64_t arg = 0;
  std::optional<std::int64_t> result;
  std::uint64_t invoked = 0;
  std::uint64_t returned = 0;
};

// Logical clock shared by the recording threads. fetch_add gives a total
// order consistent with each thread's program order and with real time.
class HistoryClock {
 public:
  std::uint64_t tick() noexcept { return now_.fetch_add(1, std::memory_order_seq_cst); }

 private:
  std::atomic<std::uint64_t> now_{0};
};

namespace detail {

template <typename Model>
bool search(const std::vector<Call>& calls, std::vector<bool>& used, std::size_t done,
            const Model& state) {
  if (done == calls.size()) return true;
  std::uint64_t earliest_return = UINT64_MAX;
  for (std::size_t i = 0; i < calls.size(); ++i) {
    if (!used[i] && calls[i].returned < earliest_return) earliest_return = calls[i].returned;
  }
  for (std::size_t i = 0; i < calls.size(); ++i) {
    if (used[i] || calls[i].invoked > earliest_return) continue;
    Model next = state;
    if (next.apply(calls[i].op, calls[i].arg) != calls[i].result) continue;
    used[i] = true;
    if (search(calls, used, done + 1, next)) return true;
    used[i] = false;
  }
  return false;
}

}  // namespace detail

// Model: copyable, `std::optional<int64_t> apply(int op, int64_t arg)`.
template <typename Model>
bool linearizable(const std::vector<Call>& calls, const Model& initial) {
  std::vector<bool> used(calls.size(), false);
  return detail::search(calls, used, 0, initial);
}

// True when some two calls from different threads overlap in time.
inline bool has_overlap(const std::vector<Call>& calls) {
  for (const auto& a : calls) {
    for (const auto& b : calls) {
      if (a.thread != b.thread && a.invoked < b.returned && b.invoked < a.returned) return true;
    }
  }
  return false;
}

// Runs `threads` threads that each issue `per_thread` calls chosen by
// `pick(thread, i) -> {op, arg}` and executed by `run(op, arg)`.
template <typename Pick, typename Run>
std::vector<Call> record(int threads, int per_thread, Pick pick, Run run) {
  HistoryClock clock;
  std::vector<std::vector<Call>> local(static_cast<std::size_t>(threads));
  std::atomic<int> ready{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      ready.fetch_add(1);
      while (ready.load() < threads) std::this_thread::yield();
      for (int i = 0; i < per_thread; ++i) {
        Call c;
        c.thread = t;
        std::tie(c.op, c.arg) = pick(t, i);
        c.invoked = clock.tick();
        if ((t + i) % 2 == 0) std::this_thread::yield();  // widen the call interval
        c.result = run(c.op, c.arg);
        c.returned = clock.tick();
        local[static_cast<std::size_t>(t)].push_back(c);
      }
    });
  }
  for (auto& th : pool) th.join();
  std::vector<Call> all;
  for (auto& v : local) all.insert(all.end(), v.begin(), v.end());
  return all;
}

}  // namespace tlab::testing
