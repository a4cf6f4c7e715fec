// Short read-heavy run of the skip-list set for each supported node capacity.

#include <cstdio>
#include <thread>

#include "throughputlab/bench.hpp"

int main() {
  tlab::bench::BenchConfig cfg;
  cfg.structure = tlab::bench::Structure::SkipList;
  cfg.N = std::max(1u, std::thread::hardware_concurrency());
  cfg.duration_s = 0.3;
  cfg.warmup_s = 0.05;
  for (std::int64_t k : tlab::bench::kSupportedK) {
    cfg.k = k;
    const auto rec = tlab::bench::run_set_bench(cfg);
    std::printf("k=%-3lld %12.0f ops/s  audit=%s\n", static_cast<long long>(k), rec.throughput,
                rec.consistent() ? "ok" : "FAILED");
  }
}
