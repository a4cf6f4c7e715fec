#pragma once

// Closed-form throughput predictions for two workloads:
//
//   lock:  acquire an MCS lock, run a critical section of C cycles, release,
//          then run a parallel section of P cycles;
//   stack: one Treiber-stack operation followed by P cycles of local work.
//
// Each prediction is piecewise: a Saturated branch, where the serialized
// handover/retry path bounds throughput regardless of N and P, and a
// ThreadBound branch, where every worker runs its full loop unimpeded and
// throughput grows with N. Costs are integer cycle counts; alpha scales a
// per-cycle rate into whatever unit the caller measures in.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "throughputlab/errors.hpp"

namespace tlab {

struct CostModel {
  double alpha = 1.0;   // scale factor, > 0
  std::int64_t W = 1;   // write / atomic RMW
  std::int64_t Ri = 1;  // read of a line invalidated by another core
  std::int64_t M = 1;   // shared read of the stack head
  std::int64_t X = 0;   // contended-RMW alternative; kept, never used by the closed forms

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
      throw DomainError("alpha must be a finite value > 0");
    }
    if (W < 1) throw DomainError("W must be >= 1");
    if (Ri < 1) throw DomainError("Ri must be >= 1");
    if (M < 1) throw DomainError("M must be >= 1");
    if (X < 0) throw DomainError("X must be >= 0");
  }

  CostModel with_alpha(double a) const {
    CostModel copy = *this;
    copy.alpha = a;
    return copy;
  }
};

struct WorkloadParams {
  std::int64_t N = 1;  // workers
  std::int64_t C = 0;  // critical-section cycles (lock workload only)
  std::int64_t P = 0;  // parallel-section cycles

  void validate() const {
    if (N < 1) throw DomainError("N must be >= 1");
    if (C < 0) throw DomainError("C must be >= 0");
    if (P < 0) throw DomainError("P must be >= 0");
  }
};

enum class Regime { Saturated, ThreadBound };

enum class WorkloadKind { Mcs, Treiber };

inline std::string_view to_string(Regime r) {
  return r == Regime::Saturated ? "Saturated" : "ThreadBound";
}

inline std::string_view to_string(WorkloadKind k) {
  return k == WorkloadKind::Mcs ? "mcs" : "treiber";
}

inline WorkloadKind parse_workload_kind(std::string_view s) {
  if (s == "mcs") return WorkloadKind::Mcs;
  if (s == "treiber") return WorkloadKind::Treiber;
  throw DomainError("unknown workload '" + std::string(s) + "' (expected mcs or treiber)");
}

struct Prediction {
  Regime regime;
  double throughput;
};

namespace detail {

inline void check_inputs(const CostModel& model, const WorkloadParams& w) {
  w.validate();
  model.validate();
}

}  // namespace detail

// Lock workload. Saturated iff P + W <= (N-1)(2W + C + Ri).
inline Prediction predict_mcs(const CostModel& model, const WorkloadParams& w) {
  detail::check_inputs(model, w);
  const std::int64_t lock_section = 2 * model.W + w.C + model.Ri;
  if (w.P + model.W <= (w.N - 1) * lock_section) {
    const auto handover = static_cast<double>(2 * model.Ri + w.C + 2 * model.W);
    return {Regime::Saturated, model.alpha * (1.0 / handover)};
  }
  const auto loop = static_cast<double>(lock_section + w.P + model.W);
  return {Regime::ThreadBound, model.alpha * (static_cast<double>(w.N) / loop)};
}

// Stack workload; C is ignored. Saturated iff P <= (N-1)(M + W).
inline Prediction predict_treiber(const CostModel& model, const WorkloadParams& w) {
  detail::check_inputs(model, w);
  const std::int64_t retry = model.M + model.W;
  if (w.P <= (w.N - 1) * retry) {
    return {Regime::Saturated, model.alpha * (1.0 / static_cast<double>(retry))};
  }
  const auto loop = static_cast<double>(w.P + retry);
  return {Regime::ThreadBound, model.alpha * (static_cast<double>(w.N) / loop)};
}

inline Prediction predict(WorkloadKind kind, const CostModel& model, const WorkloadParams& w) {
  return kind == WorkloadKind::Mcs ? predict_mcs(model, w) : predict_treiber(model, w);
}

// Largest P that still satisfies the saturated condition. Negative when the
// saturated regime is unreachable (N = 1).
inline std::int64_t crossover_mcs(const CostModel& model, std::int64_t C, std::int64_t N) {
  WorkloadParams{N, C, 0}.validate();
  return (N - 1) * (2 * model.W + C + model.Ri) - model.W;
}

inline std::int64_t crossover_treiber(const CostModel& model, std::int64_t N) {
  WorkloadParams{N, 0, 0}.validate();
  return (N - 1) * (model.M + model.W);
}

inline std::int64_t crossover(WorkloadKind kind, const CostModel& model, std::int64_t C,
                              std::int64_t N) {
  return kind == WorkloadKind::Mcs ? crossover_mcs(model, C, N) : crossover_treiber(model, N);
}

// The two MCS branches do not meet at the crossover: the saturated branch
// charges 2Ri per handover where the thread-bound branch charges Ri. This
// reports both sides evaluated at P* so callers can see the size of the jump.
struct Discontinuity {
  std::int64_t crossover;
  double saturated;
  double thread_bound;
  double relative_gap;  // (thread_bound - saturated) / saturated
};

inline Discontinuity discontinuity_mcs(const CostModel& model, std::int64_t C, std::int64_t N) {
  model.validate();
  const std::int64_t p_star = crossover_mcs(model, C, N);
  const auto handover = static_cast<double>(2 * model.Ri + C + 2 * model.W);
  const auto loop = static_cast<double>(2 * model.W + C + model.Ri + p_star + model.W);
  const double sat = model.alpha / handover;
  const double tb = model.alpha * static_cast<double>(N) / loop;
  return {p_star, sat, tb, (tb - sat) / sat};
}

// A single throughput measurement, in the same unit alpha is meant to produce.
struct Observation {
  WorkloadParams workload;
  double throughput;
};

// Least-squares scale: with p_i the prediction at alpha = 1, minimizes
// sum (alpha * p_i - m_i)^2, giving alpha = sum(p_i m_i) / sum(p_i^2).
inline CostModel fit_alpha(std::span<const Observation> records, const CostModel& model,
                           WorkloadKind kind) {
  if (records.empty()) throw CalibrationError("fit_alpha: no records to fit");
  const CostModel unit = model.with_alpha(1.0);
  double num = 0.0;
  double den = 0.0;
  for (const auto& r : records) {
    const double p = predict(kind, unit, r.workload).throughput;
    num += p * r.throughput;
    den += p * p;
  }
  if (den == 0.0) throw CalibrationError("fit_alpha: all predictions are zero");
  const double alpha = num / den;
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw CalibrationError("fit_alpha: fitted alpha is not positive (measurements all zero?)");
  }
  return model.with_alpha(alpha);
}

}  // namespace tlab
