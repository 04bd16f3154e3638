#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gdid {

enum class ErrorCode {
  InvalidArgument,
  Io,
  Config,
  MissingCell,
  NonBinaryTreatment,
  DuplicateRow,
  InsufficientHistory,
  ValidationFailed,
  SingularDesign,
  NotEnoughNeighbors,
  FoldWithoutControls,
  MissingFits,
  DegeneratePropensity,
  MissingTreatedArmFits,
  MissingComponent,
  EmptyInfluence,
  SingularJacobian,
  NotParametricPath,
  NoNeverTreatedUnits,
  HistoryNotInXi,
  WeightMismatch,
  EmptySelection,
  EmptyCluster,
  ClusterPropensityMismatch,
  AllReplicatesFailed,
  NotSpecified,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gdid
