#pragma once

#include <cstdint>

#include "throughputlab/errors.hpp"
#include "throughputlab/sim/program.hpp"

namespace tlab::sim {

namespace mcs_layout {
inline constexpr std::uint16_t kTail = 0;    // global
inline constexpr std::uint16_t kLocked = 0;  // per-worker node field
inline constexpr std::uint16_t kNext = 1;    // per-worker node field
inline constexpr std::uint8_t kPred = 0;
inline constexpr std::uint8_t kSucc = 1;
inline constexpr std::uint8_t kCasOk = 2;
inline constexpr std::uint8_t kScratch = 3;
}  // namespace mcs_layout

// One MCS lock operation: enqueue, spin for handover, critical section of C
// cycles, release, then P cycles of parallel work. Worker ids stand in for
// queue-node references; each worker reuses its own node.
//
// Costs per line: node reset UNIT, locked := true W, getAndSet(tail) W,
// pred.next := me W, spin on locked Ri, release read of next Ri, CAS(tail) W,
// wait for next Ri, handover write W.
inline AbstractProgram build_mcs_program(std::int64_t C, std::int64_t P) {
  if (C < 0 || P < 0) throw DomainError("build_mcs_program: C and P must be >= 0");
  using namespace mcs_layout;
  AbstractProgram p;
  p.name = "mcs";
  p.globals = {{"tail", kNull}};
  p.worker_fields = {{"locked", 0}, {"next", kNull}};
  p.code = {
      /* 0 */ Write{VarRef::self(kNext), Operand::imm(kNull), CostClass::Unit},
      /* 1 */ Write{VarRef::self(kLocked), Operand::imm(1), CostClass::W},
      /* 2 */ GetAndSet{VarRef::global(kTail), Operand::self_id(), CostClass::W, kPred},
      /* 3 */ BranchIf{kPred, Compare::Equal, Operand::imm(kNull), 6},
      /* 4 */ Write{VarRef::of_worker(kPred, kNext), Operand::self_id(), CostClass::W},
      /* 5 */ SpinUntil{VarRef::self(kLocked), Compare::Equal, Operand::imm(0), CostClass::Ri,
                        kScratch},
      /* 6 */ LocalWork{C},
      /* 7 */ Read{VarRef::self(kNext), CostClass::Ri, kSucc},
      /* 8 */ BranchIf{kSucc, Compare::NotEqual, Operand::imm(kNull), 12},
      /* 9 */ CompareAndSet{VarRef::global(kTail), Operand::self_id(), Operand::imm(kNull),
                            CostClass::W, kCasOk},
      /* 10 */ BranchIf{kCasOk, Compare::Equal, Operand::imm(1), 13},
      /* 11 */ SpinUntil{VarRef::self(kNext), Compare::NotEqual, Operand::imm(kNull),
                         CostClass::Ri, kSucc},
      /* 12 */ Write{VarRef::of_worker(kSucc, kLocked), Operand::imm(0), CostClass::W},
      /* 13 */ OpBoundary{},
      /* 14 */ LocalWork{P},
  };
  p.validate();
  return p;
}

struct TreiberProgramOptions {
  // Keep the head line between the read and the CAS (see Read::retain_line).
  bool retain_line = true;
  // Cycles charged for `newHead.next = oldHead`; a register-local store.
  std::int64_t link_cycles = 0;
};

namespace treiber_layout {
inline constexpr std::uint16_t kHead = 0;
inline constexpr std::uint8_t kSeen = 0;
inline constexpr std::uint8_t kCasOk = 1;
}  // namespace treiber_layout

// The generic retry loop (read head, build the new head, CAS) followed by P
// cycles of parallel work.
inline AbstractProgram build_treiber_program(std::int64_t P, TreiberProgramOptions opts = {}) {
  if (P < 0) throw DomainError("build_treiber_program: P must be >= 0");
  if (opts.link_cycles < 0) throw DomainError("build_treiber_program: link_cycles must be >= 0");
  using namespace treiber_layout;
  AbstractProgram p;
  p.name = "treiber";
  p.globals = {{"head", kNull}};
  p.code = {
      /* 0 */ Read{VarRef::global(kHead), CostClass::M, kSeen, opts.retain_line},
      /* 1 */ LocalWork{opts.link_cycles},
      /* 2 */ CompareAndSet{VarRef::global(kHead), Operand::reg(kSeen), Operand::fresh(),
                            CostClass::W, kCasOk},
      /* 3 */ BranchIf{kCasOk, Compare::Equal, Operand::imm(0), 0},
      /* 4 */ OpBoundary{},
      /* 5 */ LocalWork{P},
  };
  p.validate();
  return p;
}

inline AbstractProgram build_program(WorkloadKind kind, std::int64_t C, std::int64_t P) {
  return kind == WorkloadKind::Mcs ? build_mcs_program(C, P) : build_treiber_program(P);
}

}  // namespace tlab::sim
