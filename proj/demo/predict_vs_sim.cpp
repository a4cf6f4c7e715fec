// Sweeps the parallel section across the predicted crossover and prints the
// closed-form throughput next to the simulated one.

#include <cstdio>

#include "throughputlab/throughputlab.hpp"

int main() {
  tlab::CostModel model;
  model.W = 10;
  model.Ri = 50;
  model.M = 5;

  const std::int64_t n = 8;
  for (auto kind : {tlab::WorkloadKind::Treiber, tlab::WorkloadKind::Mcs}) {
    const std::int64_t c = kind == tlab::WorkloadKind::Mcs ? 100 : 0;
    const std::int64_t p_star = tlab::crossover(kind, model, c, n);
    std::printf("%s  N=%lld C=%lld  crossover P=%lld\n", std::string(tlab::to_string(kind)).c_str(),
                static_cast<long long>(n), static_cast<long long>(c), static_cast<long long>(p_star));
    std::printf("%8s %12s %12s %12s %12s\n", "P", "predicted", "simulated", "pred.regime", "sim.regime");
    for (int step = 0; step <= 8; ++step) {
      const std::int64_t p = p_star * step / 4;
      const auto pred = tlab::predict(kind, model, {n, c, p});
      const auto res = tlab::sim::simulate(tlab::sim::build_program(kind, c, p), model, n, 400'000,
                                           40'000, 0);
      std::printf("%8lld %12.6f %12.6f %12s %12s\n", static_cast<long long>(p), pred.throughput,
                  res.throughput_per_cycle, std::string(tlab::to_string(pred.regime)).c_str(),
                  std::string(tlab::to_string(res.regime_observed)).c_str());
    }
    std::printf("\n");
  }
}
