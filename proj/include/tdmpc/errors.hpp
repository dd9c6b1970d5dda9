#pragma once

#include <stdexcept>
#include <string>

namespace tdmpc {

/// Category used by the CLI to pick an exit code.
enum class ErrorKind { Scenario, Solver, Usage };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& name, const std::string& what)
      : std::runtime_error(what), kind_(kind), name_(name) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Short machine-readable tag, e.g. "DimensionError".
  const std::string& name() const noexcept { return name_; }

 private:
  ErrorKind kind_;
  std::string name_;
};

#define TDMPC_DEFINE_ERROR(Name, Kind)                 \
  class Name : public Error {                          \
   public:                                             \
    explicit Name(const std::string& what)             \
        : Error(ErrorKind::Kind, #Name, what) {}       \
  };

TDMPC_DEFINE_ERROR(ParseError, Scenario)
TDMPC_DEFINE_ERROR(DimensionError, Scenario)
TDMPC_DEFINE_ERROR(ValueError, Scenario)
TDMPC_DEFINE_ERROR(NotEquilibrium, Scenario)
TDMPC_DEFINE_ERROR(UnknownKind, Usage)
TDMPC_DEFINE_ERROR(NoConvergence, Solver)
TDMPC_DEFINE_ERROR(Infeasible, Solver)
TDMPC_DEFINE_ERROR(MaxIters, Solver)
TDMPC_DEFINE_ERROR(DomainError, Solver)

#undef TDMPC_DEFINE_ERROR

}  // namespace tdmpc
