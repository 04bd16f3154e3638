#include "gdid/errors.hpp"

namespace gdid {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
    case ErrorCode::MissingCell: return "MissingCell";
    case ErrorCode::NonBinaryTreatment: return "NonBinaryTreatment";
    case ErrorCode::DuplicateRow: return "DuplicateRow";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::NotEnoughNeighbors: return "NotEnoughNeighbors";
    case ErrorCode::FoldWithoutControls: return "FoldWithoutControls";
    case ErrorCode::MissingFits: return "MissingFits";
    case ErrorCode::DegeneratePropensity: return "DegeneratePropensity";
    case ErrorCode::MissingTreatedArmFits: return "MissingTreatedArmFits";
    case ErrorCode::MissingComponent: return "MissingComponent";
    case ErrorCode::EmptyInfluence: return "EmptyInfluence";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::NotParametricPath: return "NotParametricPath";
    case ErrorCode::NoNeverTreatedUnits: return "NoNeverTreatedUnits";
    case ErrorCode::HistoryNotInXi: return "HistoryNotInXi";
    case ErrorCode::WeightMismatch: return "WeightMismatch";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::EmptyCluster: return "EmptyCluster";
    case ErrorCode::ClusterPropensityMismatch: return "ClusterPropensityMismatch";
    case ErrorCode::AllReplicatesFailed: return "AllReplicatesFailed";
    case ErrorCode::NotSpecified: return "NotSpecified";
  }
  return "Unknown";
}

}  // namespace gdid
