#pragma once

// Deterministic discrete-event execution of an AbstractProgram by N workers.
//
// Timing rules:
//  * LocalWork(c) advances the worker's clock by c cycles.
//  * Every shared access occupies its variable's slot for the access cost;
//    accesses to one variable never overlap. The effect is applied at the
//    instant the slot is granted.
//  * Waiting requests are granted oldest-first. Requests that arrive in the
//    same cycle are ordered by worker index rotated by the variable's
//    rotation counter, which advances by one on every such tie.
//  * A Read with retain_line reserves the slot for its worker until that
//    worker's next shared access.
//  * A SpinUntil whose condition fails parks the worker until the variable is
//    written, then re-probes. Parked and queued time count as wait time.
//
// Operations are counted when a worker passes the OpBoundary inside the
// measurement window [warmup, horizon).

#include <algorithm>
#include <cstdint>
#include <functional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "throughputlab/cost_model.hpp"
#include "throughputlab/errors.hpp"
#include "throughputlab/sim/program.hpp"

namespace tlab::sim {

enum class AccessKind : std::uint8_t { Read, Write, GetAndSet, CompareAndSet, Probe };

inline bool is_rmw(AccessKind k) {
  return k == AccessKind::GetAndSet || k == AccessKind::CompareAndSet;
}

struct AccessRecord {
  std::int32_t worker;
  std::uint32_t var;
  std::uint32_t pc;
  AccessKind kind;
  bool success;  // CAS outcome, or whether a probe satisfied its condition
  std::int64_t start;
  std::int64_t end;

  friend bool operator==(const AccessRecord&, const AccessRecord&) = default;
};

struct SimOptions {
  // Mean wait fraction above which a run is classified as Saturated.
  double saturation_wait_threshold = 0.05;
  bool record_log = false;
};

struct SimResult {
  std::uint64_t total_ops = 0;
  std::int64_t horizon_cycles = 0;
  std::int64_t warmup_cycles = 0;
  double throughput_per_cycle = 0.0;
  std::vector<std::uint64_t> per_worker_ops;
  Regime regime_observed = Regime::ThreadBound;
  double mean_wait_fraction = 0.0;
  std::uint64_t cas_failures = 0;  // inside the measurement window
  std::vector<AccessRecord> log;   // filled only with SimOptions::record_log

  friend bool operator==(const SimResult&, const SimResult&) = default;
};

namespace detail {

class Simulator {
 public:
  Simulator(const AbstractProgram& program, const CostModel& model, std::int64_t workers,
            std::int64_t horizon, std::int64_t warmup, std::uint64_t seed, SimOptions opts)
      : prog_(program),
        model_(model),
        n_(static_cast<std::size_t>(workers)),
        horizon_(horizon),
        warmup_(warmup),
        opts_(opts) {
    const std::size_t nvars = prog_.variable_count(n_);
    vars_.resize(nvars);
    for (std::size_t g = 0; g < prog_.globals.size(); ++g) vars_[g].value = prog_.globals[g].initial;
    for (std::size_t w = 0; w < n_; ++w) {
      for (std::size_t f = 0; f < prog_.worker_fields.size(); ++f) {
        vars_[field_slot(w, f)].value = prog_.worker_fields[f].initial;
      }
    }
    const auto rot = static_cast<std::size_t>(seed % n_);
    for (auto& v : vars_) v.rotation = rot;
    workers_.resize(n_);
    for (auto& w : workers_) w.seen.assign(nvars, 0);
  }

  SimResult run() {
    for (std::size_t w = 0; w < n_; ++w) schedule_worker(w, 0);
    while (!events_.empty()) {
      const Event ev = events_.top();
      if (ev.time >= horizon_) break;
      events_.pop();
      if (ev.phase == kWorkerPhase) {
        step(ev.target, ev.time);
      } else {
        arbitrate(ev.target, ev.time);
      }
    }
    if (events_.empty()) {
      throw SimulationError("program '" + prog_.name + "' deadlocked: every worker is blocked");
    }
    return finish();
  }

 private:
  static constexpr std::uint8_t kWorkerPhase = 0;
  static constexpr std::uint8_t kArbitrationPhase = 1;
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  struct Event {
    std::int64_t time;
    std::uint8_t phase;
    std::uint64_t seq;
    std::size_t target;

    bool operator>(const Event& o) const {
      if (time != o.time) return time > o.time;
      if (phase != o.phase) return phase > o.phase;
      return seq > o.seq;
    }
  };

  enum class State : std::uint8_t { Running, Queued, ProbeDone, Parked };

  struct VarState {
    std::int64_t value = 0;
    std::uint64_t version = 0;
    std::int64_t busy_until = 0;
    std::size_t lease = kNone;
    std::size_t rotation = 0;
    bool arbitration_pending = false;
    std::vector<std::size_t> waiters;
    std::vector<std::size_t> spinners;
  };

  struct WorkerState {
    std::size_t pc = 0;
    std::int64_t regs[kRegisters] = {0, 0, 0, 0};
    State state = State::Running;
    std::size_t pending_var = kNone;
    std::size_t lease_var = kNone;
    std::int64_t since = 0;  // arrival time when Queued, park time when Parked
    std::uint64_t probe_version = 0;
    std::uint64_t ops = 0;
    std::int64_t wait = 0;
    std::vector<std::uint64_t> seen;
  };

  std::size_t field_slot(std::size_t worker, std::size_t field) const {
    return prog_.globals.size() + worker * prog_.worker_fields.size() + field;
  }

  std::size_t resolve(std::size_t w, const VarRef& ref) const {
    switch (ref.scope) {
      case VarRef::Scope::Global:
        return ref.index;
      case VarRef::Scope::Self:
        return field_slot(w, ref.index);
      case VarRef::Scope::OfWorker: {
        const std::int64_t target = workers_[w].regs[ref.reg];
        if (target < 0 || static_cast<std::size_t>(target) >= n_) {
          throw SimulationError("program '" + prog_.name + "': worker " + std::to_string(w) +
                                " dereferenced invalid node reference " + std::to_string(target));
        }
        return field_slot(static_cast<std::size_t>(target), ref.index);
      }
    }
    return 0;
  }

  std::int64_t eval(std::size_t w, const Operand& o) {
    switch (o.kind) {
      case Operand::Kind::Immediate: return o.value;
      case Operand::Kind::Register: return workers_[w].regs[o.value];
      case Operand::Kind::SelfId: return static_cast<std::int64_t>(w);
      case Operand::Kind::Fresh: return fresh_++;
    }
    return 0;
  }

  std::size_t next_pc(std::size_t pc) const { return pc + 1 == prog_.code.size() ? 0 : pc + 1; }

  std::int64_t clip(std::int64_t from, std::int64_t to) const {
    const std::int64_t lo = std::max(from, warmup_);
    const std::int64_t hi = std::min(to, horizon_);
    return hi > lo ? hi - lo : 0;
  }

  void push(std::int64_t time, std::uint8_t phase, std::size_t target) {
    events_.push(Event{time, phase, seq_++, target});
  }

  void schedule_worker(std::size_t w, std::int64_t time) { push(time, kWorkerPhase, w); }

  void schedule_arbitration(std::size_t v, std::int64_t time) {
    auto& var = vars_[v];
    if (var.arbitration_pending) return;
    var.arbitration_pending = true;
    push(std::max(time, var.busy_until), kArbitrationPhase, v);
  }

  void release_lease(std::size_t w, std::int64_t now) {
    auto& ws = workers_[w];
    if (ws.lease_var == kNone) return;
    auto& var = vars_[ws.lease_var];
    if (var.lease == w) var.lease = kNone;
    if (!var.waiters.empty()) schedule_arbitration(ws.lease_var, now);
    ws.lease_var = kNone;
  }

  void request(std::size_t w, std::size_t v, std::int64_t now) {
    auto& ws = workers_[w];
    if (ws.lease_var != kNone && ws.lease_var != v) release_lease(w, now);
    ws.state = State::Queued;
    ws.pending_var = v;
    ws.since = now;
    vars_[v].waiters.push_back(w);
    schedule_arbitration(v, now);
  }

  void step(std::size_t w, std::int64_t now) {
    auto& ws = workers_[w];
    if (ws.state == State::ProbeDone) {
      const std::size_t v = ws.pending_var;
      if (vars_[v].version != ws.probe_version) {
        request(w, v, now);
      } else {
        ws.state = State::Parked;
        ws.since = now;
        vars_[v].spinners.push_back(w);
      }
      return;
    }
    std::size_t budget = 2 * prog_.code.size() + 2;
    for (;;) {
      if (budget-- == 0) {
        throw SimulationError("program '" + prog_.name +
                              "' loops without consuming time or touching shared memory");
      }
      const Instruction& ins = prog_.code[ws.pc];
      if (const auto* lw = std::get_if<LocalWork>(&ins)) {
        ws.pc = next_pc(ws.pc);
        if (lw->cycles > 0) {
          schedule_worker(w, now + lw->cycles);
          return;
        }
      } else if (std::holds_alternative<OpBoundary>(ins)) {
        if (now >= warmup_) ++ws.ops;
        ws.pc = next_pc(ws.pc);
      } else if (const auto* br = std::get_if<BranchIf>(&ins)) {
        ws.pc = holds(br->cmp, ws.regs[br->reg], eval(w, br->value)) ? br->target
                                                                      : next_pc(ws.pc);
      } else {
        const VarRef ref = std::visit(
            [](const auto& i) -> VarRef {
              if constexpr (requires { i.var; }) {
                return i.var;
              } else {
                return VarRef{};
              }
            },
            ins);
        request(w, resolve(w, ref), now);
        return;
      }
    }
  }

  void arbitrate(std::size_t v, std::int64_t now) {
    auto& var = vars_[v];
    var.arbitration_pending = false;
    if (var.waiters.empty()) return;
    if (var.busy_until > now) {
      schedule_arbitration(v, var.busy_until);
      return;
    }
    std::size_t chosen = kNone;
    if (var.lease != kNone) {
      if (std::find(var.waiters.begin(), var.waiters.end(), var.lease) == var.waiters.end()) {
        return;  // the holder's own request re-triggers arbitration
      }
      chosen = var.lease;
    } else {
      std::int64_t oldest = workers_[var.waiters.front()].since;
      for (std::size_t w : var.waiters) oldest = std::min(oldest, workers_[w].since);
      std::size_t tied = 0;
      std::size_t best_rank = kNone;
      for (std::size_t w : var.waiters) {
        if (workers_[w].since != oldest) continue;
        ++tied;
        const std::size_t rank = (w + n_ - var.rotation) % n_;
        if (rank < best_rank) {
          best_rank = rank;
          chosen = w;
        }
      }
      if (tied > 1) var.rotation = (var.rotation + 1) % n_;
    }
    var.waiters.erase(std::find(var.waiters.begin(), var.waiters.end(), chosen));
    grant(chosen, v, now);
    if (!var.waiters.empty()) schedule_arbitration(v, var.busy_until);
  }

  void store(std::size_t w, std::size_t v, std::int64_t value, std::int64_t now) {
    auto& var = vars_[v];
    var.value = value;
    ++var.version;
    workers_[w].seen[v] = var.version;
    if (var.spinners.empty()) return;
    std::vector<std::size_t> woken;
    woken.swap(var.spinners);
    for (std::size_t s : woken) {
      workers_[s].wait += clip(workers_[s].since, now);
      request(s, v, now);
    }
  }

  void grant(std::size_t w, std::size_t v, std::int64_t now) {
    auto& ws = workers_[w];
    auto& var = vars_[v];
    ws.wait += clip(ws.since, now);
    ws.state = State::Running;
    if (var.lease == w) {
      var.lease = kNone;
      ws.lease_var = kNone;
    }

    const Instruction& ins = prog_.code[ws.pc];
    bool advance = true;
    bool success = true;
    AccessKind kind = AccessKind::Read;
    std::int64_t cost = 1;

    if (const auto* rd = std::get_if<Read>(&ins)) {
      kind = AccessKind::Read;
      cost = cost_of(rd->cost, model_);
      var.busy_until = now + cost;
      ws.regs[rd->dst] = var.value;
      ws.seen[v] = var.version;
      if (rd->retain_line) {
        var.lease = w;
        ws.lease_var = v;
      }
    } else if (const auto* wr = std::get_if<Write>(&ins)) {
      kind = AccessKind::Write;
      cost = cost_of(wr->cost, model_);
      var.busy_until = now + cost;
      store(w, v, eval(w, wr->value), now);
    } else if (const auto* gs = std::get_if<GetAndSet>(&ins)) {
      kind = AccessKind::GetAndSet;
      cost = cost_of(gs->cost, model_);
      var.busy_until = now + cost;
      const std::int64_t old = var.value;
      store(w, v, eval(w, gs->value), now);
      ws.regs[gs->dst] = old;
    } else if (const auto* cas = std::get_if<CompareAndSet>(&ins)) {
      kind = AccessKind::CompareAndSet;
      cost = cost_of(cas->cost, model_);
      var.busy_until = now + cost;
      if (var.value == eval(w, cas->expected)) {
        store(w, v, eval(w, cas->desired), now);
        ws.regs[cas->dst] = 1;
      } else {
        ws.seen[v] = var.version;
        ws.regs[cas->dst] = 0;
        success = false;
        if (now >= warmup_) ++cas_failures_;
      }
    } else if (const auto* spin = std::get_if<SpinUntil>(&ins)) {
      kind = AccessKind::Probe;
      cost = ws.seen[v] != var.version ? cost_of(spin->cost, model_) : 1;
      var.busy_until = now + cost;
      ws.seen[v] = var.version;
      if (holds(spin->cmp, var.value, eval(w, spin->value))) {
        ws.regs[spin->dst] = var.value;
      } else {
        advance = false;
        success = false;
        ws.state = State::ProbeDone;
        ws.pending_var = v;
        ws.probe_version = var.version;
      }
    }

    if (opts_.record_log) {
      log_.push_back(AccessRecord{static_cast<std::int32_t>(w), static_cast<std::uint32_t>(v),
                                  static_cast<std::uint32_t>(ws.pc), kind, success, now,
                                  now + cost});
    }
    if (advance) ws.pc = next_pc(ws.pc);
    schedule_worker(w, now + cost);
  }

  SimResult finish() {
    SimResult r;
    r.horizon_cycles = horizon_;
    r.warmup_cycles = warmup_;
    r.per_worker_ops.reserve(n_);
    double wait_sum = 0.0;
    for (auto& ws : workers_) {
      if (ws.state == State::Queued || ws.state == State::Parked) ws.wait += clip(ws.since, horizon_);
      r.per_worker_ops.push_back(ws.ops);
      r.total_ops += ws.ops;
      wait_sum += static_cast<double>(ws.wait);
    }
    const auto window = static_cast<double>(horizon_ - warmup_);
    r.throughput_per_cycle = static_cast<double>(r.total_ops) / window;
    r.mean_wait_fraction = wait_sum / static_cast<double>(n_) / window;
    r.regime_observed = r.mean_wait_fraction > opts_.saturation_wait_threshold
                            ? Regime::Saturated
                            : Regime::ThreadBound;
    r.cas_failures = cas_failures_;
    r.log = std::move(log_);
    return r;
  }

  const AbstractProgram& prog_;
  CostModel model_;
  std::size_t n_;
  std::int64_t horizon_;
  std::int64_t warmup_;
  SimOptions opts_;
  std::vector<VarState> vars_;
  std::vector<WorkerState> workers_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  std::uint64_t seq_ = 0;
  std::int64_t fresh_ = std::int64_t{1} << 32;
  std::uint64_t cas_failures_ = 0;
  std::vector<AccessRecord> log_;
};

}  // namespace detail

inline SimResult simulate(const AbstractProgram& program, const CostModel& model,
                          std::int64_t workers, std::int64_t horizon, std::int64_t warmup,
                          std::uint64_t seed, SimOptions opts = {}) {
  if (workers < 1) throw DomainError("simulate: N must be >= 1");
  if (warmup < 0) throw DomainError("simulate: warmup must be >= 0");
  if (horizon <= warmup) throw DomainError("simulate: horizon must be > warmup");
  model.validate();
  program.validate();
  return detail::Simulator(program, model, workers, horizon, warmup, seed, opts).run();
}

// ---------------------------------------------------------------------------
// Parameter sweeps

using ProgramBuilder = std::function<AbstractProgram(std::int64_t C, std::int64_t P)>;

struct SweepSpec {
  std::string structure;
  CostModel model;
  std::vector<std::int64_t> N;
  std::vector<std::int64_t> P;
  std::vector<std::int64_t> C{0};
  std::int64_t horizon = 1'000'000;
  std::int64_t warmup = 100'000;
  std::uint64_t seed = 0;
  SimOptions options{};
};

struct SweepRow {
  std::string structure;
  CostModel model;
  std::int64_t N;
  std::int64_t C;
  std::int64_t P;
  std::uint64_t seed;
  SimResult result;
};

inline std::vector<SweepRow> sweep(const ProgramBuilder& build, const SweepSpec& spec) {
  if (spec.N.empty() || spec.P.empty() || spec.C.empty()) {
    throw DomainError("sweep: N, P and C ranges must be non-empty");
  }
  std::vector<SweepRow> rows;
  rows.reserve(spec.N.size() * spec.P.size() * spec.C.size());
  for (std::int64_t c : spec.C) {
    for (std::int64_t p : spec.P) {
      const AbstractProgram program = build(c, p);
      for (std::int64_t n : spec.N) {
        rows.push_back(SweepRow{spec.structure, spec.model, n, c, p, spec.seed,
                                simulate(program, spec.model, n, spec.horizon, spec.warmup,
                                         spec.seed, spec.options)});
      }
    }
  }
  return rows;
}

}  // namespace tlab::sim
