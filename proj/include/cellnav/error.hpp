#pragma once

#include <stdexcept>
#include <string>

namespace cellnav {

enum class ErrorKind {
  // geometry
  EmptyPolytope,
  Unbounded,
  DegeneratePair,
  // environment / io
  ParseError,
  SchemaError,
  InvalidGeometry,
  DecompositionFailed,
  // planner
  Unreachable,
  InvalidCycle,
  MissingFace,
  InvalidGoal,
  // lp
  DimensionMismatch,
  NumericalFailure,
  // synthesis
  NoRelativeDegree,
  HeterogeneousRelativeDegree,
  EmptyRegion,
  GoalOutsideCell,
  InvalidSystem,
  InvalidConfig,
  Infeasible,
  // runtime
  CoincidentLandmark,
  MissingLandmark,
  NoVisibleLandmark,
  DegenerateGeometry,
  FixedLandmarkHidden,
  OutOfDecomposition,
  ZeroControl,
  // simulator
  BadInitialState,
  PreconditionViolated,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cellnav
