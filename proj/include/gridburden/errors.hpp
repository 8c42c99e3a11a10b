#pragma once

#include <stdexcept>
#include <string>

namespace gridburden {

// Every failure mode the library reports. The CLI maps these to exit codes.
enum class ErrorKind {
  DisconnectedNetwork,
  SingularBusMatrix,
  ConflictingColocatedGenerators,
  InvalidNetwork,
  ParseError,
  UnsupportedCostModel,
  NonPositiveIncome,
  IoError,
  DimensionMismatch,
  InvalidInput,
  RankDeficientEquality,
  Infeasible,
  Unbounded,
  MaxIterations,
  NotConverged,
  SingularJacobian,
  InvalidStep,
  ZeroDenominator,
  MissingSeries,
  MisalignedSeries,
  ModelMismatch,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DisconnectedNetwork: return "DisconnectedNetwork";
    case ErrorKind::SingularBusMatrix: return "SingularBusMatrix";
    case ErrorKind::ConflictingColocatedGenerators: return "ConflictingColocatedGenerators";
    case ErrorKind::InvalidNetwork: return "InvalidNetwork";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnsupportedCostModel: return "UnsupportedCostModel";
    case ErrorKind::NonPositiveIncome: return "NonPositiveIncome";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::RankDeficientEquality: return "RankDeficientEquality";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::Unbounded: return "Unbounded";
    case ErrorKind::MaxIterations: return "MaxIterations";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::InvalidStep: return "InvalidStep";
    case ErrorKind::ZeroDenominator: return "ZeroDenominator";
    case ErrorKind::MissingSeries: return "MissingSeries";
    case ErrorKind::MisalignedSeries: return "MisalignedSeries";
    case ErrorKind::ModelMismatch: return "ModelMismatch";
  }
  return "UnknownError";
}

}  // namespace gridburden
