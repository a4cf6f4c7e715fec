#pragma once

// Abstract programs executed by the schedule simulator.
//
// A program is one loop body; each worker runs it forever, wrapping from the
// last instruction back to the first. Shared variables are either global or
// per-worker fields (one copy per worker, e.g. an MCS queue node). Values are
// 64-bit integers; kNull stands in for a null reference and worker ids stand
// in for node references.

#include <cstddef>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "throughputlab/cost_model.hpp"
#include "throughputlab/errors.hpp"

namespace tlab::sim {

inline constexpr std::int64_t kNull = -1;
inline constexpr std::size_t kRegisters = 4;

enum class CostClass : std::uint8_t { W, Ri, M, X, Unit };

inline std::int64_t cost_of(CostClass c, const CostModel& m) {
  switch (c) {
    case CostClass::W: return m.W;
    case CostClass::Ri: return m.Ri;
    case CostClass::M: return m.M;
    case CostClass::X: return m.X;
    case CostClass::Unit: return 1;
  }
  return 1;
}

inline const char* to_string(CostClass c) {
  switch (c) {
    case CostClass::W: return "W";
    case CostClass::Ri: return "Ri";
    case CostClass::M: return "M";
    case CostClass::X: return "X";
    case CostClass::Unit: return "UNIT";
  }
  return "?";
}

struct VarRef {
  enum class Scope : std::uint8_t { Global, Self, OfWorker };

  Scope scope = Scope::Global;
  std::uint16_t index = 0;  // global slot, or field slot for Self/OfWorker
  std::uint8_t reg = 0;     // OfWorker: register holding the worker id

  static VarRef global(std::uint16_t slot) { return {Scope::Global, slot, 0}; }
  static VarRef self(std::uint16_t field) { return {Scope::Self, field, 0}; }
  static VarRef of_worker(std::uint8_t reg, std::uint16_t field) {
    return {Scope::OfWorker, field, reg};
  }
};

struct Operand {
  enum class Kind : std::uint8_t { Immediate, Register, SelfId, Fresh };

  Kind kind = Kind::Immediate;
  std::int64_t value = 0;

  static Operand imm(std::int64_t v) { return {Kind::Immediate, v}; }
  static Operand reg(std::uint8_t r) { return {Kind::Register, r}; }
  static Operand self_id() { return {Kind::SelfId, 0}; }
  // A value never produced before in this simulation (a freshly allocated node).
  static Operand fresh() { return {Kind::Fresh, 0}; }
};

enum class Compare : std::uint8_t { Equal, NotEqual };

inline bool holds(Compare cmp, std::int64_t lhs, std::int64_t rhs) {
  return cmp == Compare::Equal ? lhs == rhs : lhs != rhs;
}

struct LocalWork {
  std::int64_t cycles = 0;
};

// retain_line keeps the variable's slot reserved for this worker until its
// next shared access, modelling a read-for-ownership that the following
// RMW hits in cache.
struct Read {
  VarRef var;
  CostClass cost;
  std::uint8_t dst;
  bool retain_line = false;
};

struct Write {
  VarRef var;
  Operand value;
  CostClass cost;
};

struct GetAndSet {
  VarRef var;
  Operand value;
  CostClass cost;
  std::uint8_t dst;  // previous value
};

struct CompareAndSet {
  VarRef var;
  Operand expected;
  Operand desired;
  CostClass cost;
  std::uint8_t dst;  // 1 on success, 0 on failure
};

// Re-probes until (var cmp value) holds. A probe costs the class cost when the
// variable was written by someone else since this worker last saw it, and one
// cycle otherwise. dst receives the value that satisfied the condition.
struct SpinUntil {
  VarRef var;
  Compare cmp;
  Operand value;
  CostClass cost;
  std::uint8_t dst;
};

// Free control flow: jumps to target when (reg cmp value) holds.
struct BranchIf {
  std::uint8_t reg;
  Compare cmp;
  Operand value;
  std::size_t target;
};

struct OpBoundary {};

using Instruction =
    std::variant<LocalWork, Read, Write, GetAndSet, CompareAndSet, SpinUntil, BranchIf, OpBoundary>;

struct SharedVariable {
  std::string name;
  std::int64_t initial = 0;
};

struct AbstractProgram {
  std::string name;
  std::vector<SharedVariable> globals;
  std::vector<SharedVariable> worker_fields;
  std::vector<Instruction> code;

  std::size_t op_boundary() const {
    for (std::size_t i = 0; i < code.size(); ++i) {
      if (std::holds_alternative<OpBoundary>(code[i])) return i;
    }
    throw SimulationError("program '" + name + "' has no operation boundary");
  }

  std::size_t variable_count(std::size_t workers) const {
    return globals.size() + workers * worker_fields.size();
  }

  void validate() const;
};

namespace detail {

inline void check_var(const AbstractProgram& p, const VarRef& v, std::size_t at) {
  const bool ok = v.scope == VarRef::Scope::Global ? v.index < p.globals.size()
                                                   : v.index < p.worker_fields.size();
  if (!ok) {
    throw SimulationError("program '" + p.name + "': instruction " + std::to_string(at) +
                          " references an undeclared variable");
  }
  if (v.scope == VarRef::Scope::OfWorker && v.reg >= kRegisters) {
    throw SimulationError("program '" + p.name + "': bad register in instruction " +
                          std::to_string(at));
  }
}

inline void check_reg(const AbstractProgram& p, std::size_t r, std::size_t at) {
  if (r >= kRegisters) {
    throw SimulationError("program '" + p.name + "': bad register in instruction " +
                          std::to_string(at));
  }
}

inline void check_operand(const AbstractProgram& p, const Operand& o, std::size_t at) {
  if (o.kind == Operand::Kind::Register) check_reg(p, static_cast<std::size_t>(o.value), at);
}

}  // namespace detail

inline void AbstractProgram::validate() const {
  if (code.empty()) throw SimulationError("program '" + name + "' is empty");
  std::size_t boundaries = 0;
  for (std::size_t i = 0; i < code.size(); ++i) {
    std::visit(
        [&](const auto& ins) {
          using T = std::decay_t<decltype(ins)>;
          if constexpr (std::is_same_v<T, LocalWork>) {
            if (ins.cycles < 0) {
              throw SimulationError("program '" + name + "': negative LocalWork at " +
                                    std::to_string(i));
            }
          } else if constexpr (std::is_same_v<T, OpBoundary>) {
            ++boundaries;
          } else if constexpr (std::is_same_v<T, BranchIf>) {
            detail::check_reg(*this, ins.reg, i);
            detail::check_operand(*this, ins.value, i);
            if (ins.target >= code.size()) {
              throw SimulationError("program '" + name + "': branch target out of range at " +
                                    std::to_string(i));
            }
          } else {
            detail::check_var(*this, ins.var, i);
            if constexpr (std::is_same_v<T, Write>) {
              detail::check_operand(*this, ins.value, i);
            } else {
              detail::check_reg(*this, ins.dst, i);
            }
            if constexpr (std::is_same_v<T, GetAndSet> || std::is_same_v<T, SpinUntil>) {
              detail::check_operand(*this, ins.value, i);
            }
            if constexpr (std::is_same_v<T, CompareAndSet>) {
              detail::check_operand(*this, ins.expected, i);
              detail::check_operand(*this, ins.desired, i);
            }
          }
        },
        code[i]);
  }
  if (boundaries != 1) {
    throw SimulationError("program '" + name + "' must contain exactly one operation boundary");
  }
}

}  // namespace tlab::sim
