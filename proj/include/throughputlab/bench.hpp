#pragma once

// Real-thread throughput harness.
//
// N workers are released together through a barrier and run a fixed loop
// until a shared stop flag is raised. Each worker bumps its own padded
// counter; the coordinator samples all counters when the warmup ends and
// again when the measurement ends, so the hot path never reads the clock.
//
//   lock:    acquire MCS; spin C; release; spin P
//   stack:   alternate pop / push on a Treiber stack; spin P
//   set:     random contains/insert/remove by mix over [0, key_range)

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <vector>

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#endif

#include "throughputlab/cost_model.hpp"
#include "throughputlab/csv.hpp"
#include "throughputlab/errors.hpp"
#include "throughputlab/fat_skiplist.hpp"
#include "throughputlab/mcs_lock.hpp"
#include "throughputlab/spin.hpp"
#include "throughputlab/treiber_stack.hpp"

namespace tlab::bench {

enum class Structure { Mcs, Treiber, SkipList };

inline std::string_view to_string(Structure s) {
  switch (s) {
    case Structure::Mcs: return "mcs";
    case Structure::Treiber: return "treiber";
    case Structure::SkipList: return "skiplist";
  }
  return "?";
}

inline Structure parse_structure(std::string_view s) {
  if (s == "mcs") return Structure::Mcs;
  if (s == "treiber") return Structure::Treiber;
  if (s == "skiplist") return Structure::SkipList;
  throw DomainError("unknown structure '" + std::string(s) + "' (expected mcs, treiber or skiplist)");
}

// Node capacities with a compiled instantiation.
inline constexpr std::int64_t kSupportedK[] = {1, 2, 4, 8, 16, 32, 64};

struct OpMix {
  std::int64_t contains = 90;
  std::int64_t insert = 5;
  std::int64_t remove = 5;

  bool operator==(const OpMix&) const = default;
};

struct BenchConfig {
  Structure structure = Structure::Mcs;
  std::int64_t N = 1;
  std::int64_t C = 0;
  std::int64_t P = 0;
  std::int64_t k = 32;              // skip-list node capacity
  OpMix mix{};                      // skip-list only
  std::int64_t key_range = 100000;  // keys are drawn from [0, key_range)
  double prefill = 0.5;             // fraction of key_range present before timing
  double warmup_s = 0.1;
  double duration_s = 1.0;
  std::uint64_t seed = 0;
  bool pin = false;  // pin worker i to CPU i % hardware_concurrency
  std::string host_tag;

  void validate() const {
    if (N < 1) throw DomainError("N must be >= 1");
    if (C < 0) throw DomainError("C must be >= 0");
    if (P < 0) throw DomainError("P must be >= 0");
    if (!(duration_s > 0.0) || !std::isfinite(duration_s)) throw DomainError("duration must be > 0");
    if (!(warmup_s >= 0.0) || !std::isfinite(warmup_s)) throw DomainError("warmup must be >= 0");
    if (!(prefill >= 0.0 && prefill <= 1.0)) throw DomainError("prefill must be in [0, 1]");
    if (key_range < 1) throw DomainError("key_range must be >= 1");
    if (mix.contains < 0 || mix.insert < 0 || mix.remove < 0 ||
        mix.contains + mix.insert + mix.remove != 100) {
      throw DomainError("operation mix must be non-negative and sum to 100");
    }
    if (structure == Structure::SkipList &&
        std::find(std::begin(kSupportedK), std::end(kSupportedK), k) == std::end(kSupportedK)) {
      throw DomainError("k must be one of 1, 2, 4, 8, 16, 32, 64");
    }
  }

  std::int64_t prefill_count() const {
    return static_cast<std::int64_t>(std::llround(prefill * static_cast<double>(key_range)));
  }
};

struct BenchRecord {
  BenchConfig config;
  double throughput = 0.0;  // ops per second over the measured window
  std::vector<double> per_worker_throughput;
  std::vector<std::uint64_t> per_worker_ops;
  std::uint64_t total_ops = 0;
  double measured_duration_s = 0.0;
  std::string timestamp;  // UTC, ISO 8601

  // Consistency evidence gathered after the workers stop.
  std::uint64_t completed_loops = 0;  // warmup and tail included
  std::uint64_t guarded_count = 0;    // mcs: counter touched only under the lock
  std::uint64_t empty_pops = 0;       // treiber
  std::int64_t expected_size = 0;     // treiber, skiplist: prefill + net inserts
  std::int64_t final_size = 0;
  bool audit_ok = true;  // skiplist structural audit

  bool consistent() const {
    switch (config.structure) {
      case Structure::Mcs: return guarded_count == completed_loops;
      case Structure::Treiber: return expected_size == final_size;
      case Structure::SkipList: return audit_ok && expected_size == final_size;
    }
    return false;
  }
};

namespace detail {

struct alignas(64) Counter {
  std::atomic<std::uint64_t> value{0};

  void bump() noexcept { value.store(value.load(std::memory_order_relaxed) + 1, std::memory_order_relaxed); }
  std::uint64_t read() const noexcept { return value.load(std::memory_order_relaxed); }
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void pin_to_cpu(std::size_t worker) {
#if defined(__linux__)
  const unsigned cpus = std::max(1u, std::thread::hardware_concurrency());
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(worker % cpus, &set);
  pthread_setaffinity_np(pthread_self(), sizeof set, &set);
#else
  (void)worker;
#endif
}

// Runs body(worker, counter, stop) on cfg.N threads and measures the window.
// body must bump the counter once per completed loop and return when stop
// becomes true.
template <typename Body>
BenchRecord run_workers(const BenchConfig& cfg, Body&& body) {
  const auto n = static_cast<std::size_t>(cfg.N);
  std::vector<Counter> counters(n);
  std::atomic<bool> stop{false};
  std::atomic<bool> abort{false};
  std::barrier start(static_cast<std::ptrdiff_t>(n + 1));
  std::vector<std::thread> pool;
  pool.reserve(n);
  try {
    for (std::size_t w = 0; w < n; ++w) {
      pool.emplace_back([&, w] {
        if (cfg.pin) pin_to_cpu(w);
        start.arrive_and_wait();
        if (abort.load(std::memory_order_relaxed)) return;
        body(w, counters[w], stop);
      });
    }
  } catch (const std::system_error& e) {
    abort.store(true);
    stop.store(true);
    (void)start.arrive(static_cast<std::ptrdiff_t>(n - pool.size() + 1));
    for (auto& t : pool) t.join();
    throw HarnessError("failed to spawn worker " + std::to_string(pool.size()) + " of " +
                       std::to_string(n) + ": " + e.what());
  }

  using clock = std::chrono::steady_clock;
  start.arrive_and_wait();
  std::this_thread::sleep_for(std::chrono::duration<double>(cfg.warmup_s));
  std::vector<std::uint64_t> before(n);
  for (std::size_t w = 0; w < n; ++w) before[w] = counters[w].read();
  const auto t0 = clock::now();
  std::this_thread::sleep_for(std::chrono::duration<double>(cfg.duration_s));
  std::vector<std::uint64_t> after(n);
  for (std::size_t w = 0; w < n; ++w) after[w] = counters[w].read();
  const auto t1 = clock::now();
  stop.store(true, std::memory_order_relaxed);
  for (auto& t : pool) t.join();

  BenchRecord rec;
  rec.config = cfg;
  rec.timestamp = utc_timestamp();
  rec.measured_duration_s = std::chrono::duration<double>(t1 - t0).count();
  for (std::size_t w = 0; w < n; ++w) {
    const std::uint64_t ops = after[w] - before[w];
    rec.per_worker_ops.push_back(ops);
    rec.per_worker_throughput.push_back(static_cast<double>(ops) / rec.measured_duration_s);
    rec.total_ops += ops;
    rec.completed_loops += counters[w].read();
  }
  rec.throughput = static_cast<double>(rec.total_ops) / rec.measured_duration_s;
  return rec;
}

template <std::size_t K>
BenchRecord run_set(const BenchConfig& cfg) {
  FatNodeSkipListSet<std::int64_t, K> set;
  const auto range = static_cast<std::uint64_t>(cfg.key_range);
  {
    std::vector<std::int64_t> keys(static_cast<std::size_t>(cfg.key_range));
    std::iota(keys.begin(), keys.end(), std::int64_t{0});
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(keys.begin(), keys.end(), rng);
    keys.resize(static_cast<std::size_t>(cfg.prefill_count()));
    for (std::int64_t key : keys) set.insert(key);
  }
  std::vector<std::int64_t> net(static_cast<std::size_t>(cfg.N), 0);
  const auto contains_below = static_cast<std::uint64_t>(cfg.mix.contains);
  const auto insert_below = static_cast<std::uint64_t>(cfg.mix.contains + cfg.mix.insert);
  BenchRecord rec = run_workers(cfg, [&](std::size_t w, Counter& done, std::atomic<bool>& stop) {
    std::mt19937_64 rng(cfg.seed + w);
    std::int64_t delta = 0;
    while (!stop.load(std::memory_order_relaxed)) {
      const std::uint64_t pick = rng() % 100;
      const auto key = static_cast<std::int64_t>(rng() % range);
      if (pick < contains_below) {
        set.contains(key);
      } else if (pick < insert_below) {
        delta += set.insert(key) ? 1 : 0;
      } else {
        delta -= set.remove(key) ? 1 : 0;
      }
      done.bump();
    }
    net[w] = delta;
  });
  rec.expected_size = cfg.prefill_count() + std::accumulate(net.begin(), net.end(), std::int64_t{0});
  rec.final_size = static_cast<std::int64_t>(set.size_quiescent());
  rec.audit_ok = set.audit().ok;
  return rec;
}

}  // namespace detail

inline BenchRecord run_lock_bench(const BenchConfig& cfg) {
  cfg.validate();
  if (cfg.structure != Structure::Mcs) throw DomainError("run_lock_bench needs structure mcs");
  McsLock lock;
  std::vector<McsLock::Node> nodes(static_cast<std::size_t>(cfg.N));
  std::uint64_t guarded = 0;
  const auto c = static_cast<std::uint64_t>(cfg.C);
  const auto p = static_cast<std::uint64_t>(cfg.P);
  BenchRecord rec = detail::run_workers(cfg, [&](std::size_t w, detail::Counter& done,
                                                 std::atomic<bool>& stop) {
    McsLock::Node& node = nodes[w];
    while (!stop.load(std::memory_order_relaxed)) {
      lock.lock(node);
      ++guarded;
      spin_work(c);
      lock.unlock(node);
      spin_work(p);
      done.bump();
    }
  });
  rec.guarded_count = guarded;
  return rec;
}

// Workers alternate pop, push, pop, ... starting with pop. With at least N
// elements prefilled no pop can find the stack empty.
inline BenchRecord run_stack_bench(const BenchConfig& cfg) {
  cfg.validate();
  if (cfg.structure != Structure::Treiber) throw DomainError("run_stack_bench needs structure treiber");
  TreiberStack<std::uint64_t> stack;
  const std::int64_t initial = cfg.prefill_count();
  for (std::int64_t i = 0; i < initial; ++i) stack.push(static_cast<std::uint64_t>(i));
  std::vector<std::uint64_t> pushes(static_cast<std::size_t>(cfg.N), 0);
  std::vector<std::uint64_t> pops(static_cast<std::size_t>(cfg.N), 0);
  std::vector<std::uint64_t> empties(static_cast<std::size_t>(cfg.N), 0);
  const auto p = static_cast<std::uint64_t>(cfg.P);
  BenchRecord rec = detail::run_workers(cfg, [&](std::size_t w, detail::Counter& done,
                                                 std::atomic<bool>& stop) {
    std::uint64_t pushed = 0, popped = 0, empty = 0;
    bool pop_next = true;
    while (!stop.load(std::memory_order_relaxed)) {
      if (pop_next) {
        if (stack.pop()) {
          ++popped;
        } else {
          ++empty;
        }
      } else {
        stack.push((std::uint64_t{w} << 40) | pushed);
        ++pushed;
      }
      pop_next = !pop_next;
      spin_work(p);
      done.bump();
    }
    pushes[w] = pushed;
    pops[w] = popped;
    empties[w] = empty;
  });
  const auto sum = [](const std::vector<std::uint64_t>& v) {
    return std::accumulate(v.begin(), v.end(), std::uint64_t{0});
  };
  rec.empty_pops = sum(empties);
  rec.expected_size = initial + static_cast<std::int64_t>(sum(pushes)) - static_cast<std::int64_t>(sum(pops));
  rec.final_size = static_cast<std::int64_t>(stack.size_quiescent());
  return rec;
}

inline BenchRecord run_set_bench(const BenchConfig& cfg) {
  cfg.validate();
  if (cfg.structure != Structure::SkipList) throw DomainError("run_set_bench needs structure skiplist");
  switch (cfg.k) {
    case 1: return detail::run_set<1>(cfg);
    case 2: return detail::run_set<2>(cfg);
    case 4: return detail::run_set<4>(cfg);
    case 8: return detail::run_set<8>(cfg);
    case 16: return detail::run_set<16>(cfg);
    case 32: return detail::run_set<32>(cfg);
    default: return detail::run_set<64>(cfg);
  }
}

inline BenchRecord run_bench(const BenchConfig& cfg) {
  switch (cfg.structure) {
    case Structure::Mcs: return run_lock_bench(cfg);
    case Structure::Treiber: return run_stack_bench(cfg);
    case Structure::SkipList: return run_set_bench(cfg);
  }
  throw DomainError("unknown structure");
}

// ---- comparison -------------------------------------------------------------

struct ComparisonReport {
  std::vector<double> ratios;  // candidate / baseline, in record order
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

// Pairs baseline[i] with candidate[i]. Paired records must agree on N, C, P,
// operation mix, key range and prefill; they may differ in k or structure.
inline ComparisonReport compare(std::span<const BenchRecord> baseline,
                                std::span<const BenchRecord> candidate) {
  if (baseline.empty()) throw DomainError("compare: no records");
  if (baseline.size() != candidate.size()) {
    throw DomainError("compare: " + std::to_string(baseline.size()) + " baseline records vs " +
                      std::to_string(candidate.size()) + " candidate records");
  }
  std::string mismatches;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    const BenchConfig& a = baseline[i].config;
    const BenchConfig& b = candidate[i].config;
    const auto note = [&](const char* field, const std::string& x, const std::string& y) {
      mismatches += "\n  record " + std::to_string(i) + ": " + field + " " + x + " vs " + y;
    };
    if (a.N != b.N) note("N", std::to_string(a.N), std::to_string(b.N));
    if (a.C != b.C) note("C", std::to_string(a.C), std::to_string(b.C));
    if (a.P != b.P) note("P", std::to_string(a.P), std::to_string(b.P));
    if (!(a.mix == b.mix)) {
      const auto mix = [](const OpMix& m) {
        return std::to_string(m.contains) + "/" + std::to_string(m.insert) + "/" + std::to_string(m.remove);
      };
      note("mix", mix(a.mix), mix(b.mix));
    }
    if (a.key_range != b.key_range) note("key_range", std::to_string(a.key_range), std::to_string(b.key_range));
    if (a.prefill != b.prefill) note("prefill", csv::detail::fmt(a.prefill), csv::detail::fmt(b.prefill));
  }
  if (!mismatches.empty()) throw DomainError("compare: mismatched configurations:" + mismatches);

  ComparisonReport report;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    if (!(baseline[i].throughput > 0.0)) {
      throw DomainError("compare: baseline record " + std::to_string(i) + " has zero throughput");
    }
    report.ratios.push_back(candidate[i].throughput / baseline[i].throughput);
  }
  std::vector<double> sorted = report.ratios;
  std::sort(sorted.begin(), sorted.end());
  report.min = sorted.front();
  report.max = sorted.back();
  const std::size_t mid = sorted.size() / 2;
  report.median = sorted.size() % 2 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2.0;
  return report;
}

// ---- conversions ------------------------------------------------------------

inline csv::Row to_row(const BenchRecord& rec) {
  const BenchConfig& c = rec.config;
  csv::Row r;
  r.source = "bench";
  r.structure = std::string(to_string(c.structure));
  r.N = c.N;
  switch (c.structure) {
    case Structure::Mcs:
      r.C = c.C;
      r.P = c.P;
      break;
    case Structure::Treiber:
      r.P = c.P;
      r.key_range = c.key_range;
      r.prefill = c.prefill;
      break;
    case Structure::SkipList:
      r.k = c.k;
      r.mix_contains = c.mix.contains;
      r.mix_insert = c.mix.insert;
      r.mix_remove = c.mix.remove;
      r.key_range = c.key_range;
      r.prefill = c.prefill;
      break;
  }
  r.duration_s = rec.measured_duration_s;
  r.throughput_ops_s = rec.throughput;
  r.seed = c.seed;
  r.host_tag = c.host_tag;
  return r;
}

// Observation for fit_alpha from a bench row of the lock or stack workload.
inline Observation to_observation(const csv::Row& row) {
  if (!row.N || !row.throughput_ops_s) {
    throw CalibrationError("row lacks N or throughput_ops_s");
  }
  WorkloadParams w;
  w.N = *row.N;
  w.C = row.C.value_or(0);
  w.P = row.P.value_or(0);
  return {w, *row.throughput_ops_s};
}

inline Observation to_observation(const BenchRecord& rec) {
  WorkloadParams w;
  w.N = rec.config.N;
  w.C = rec.config.structure == Structure::Mcs ? rec.config.C : 0;
  w.P = rec.config.P;
  return {w, rec.throughput};
}

}  // namespace tlab::bench
