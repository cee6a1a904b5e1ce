#include "cstalign/error.hpp"

namespace cstalign {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConcept: return "InvalidConcept";
    case ErrorKind::DuplicateConcept: return "DuplicateConcept";
    case ErrorKind::MissingDescription: return "MissingDescription";
    case ErrorKind::EmptySpec: return "EmptySpec";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DanglingReference: return "DanglingReference";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::NormalizationDegenerate: return "NormalizationDegenerate";
    case ErrorKind::MeanOfEmptySet: return "MeanOfEmptySet";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::DuplicateClassInBatch: return "DuplicateClassInBatch";
    case ErrorKind::BatchTooLarge: return "BatchTooLarge";
    case ErrorKind::InvalidTemperature: return "InvalidTemperature";
    case ErrorKind::InvalidTargets: return "InvalidTargets";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::CheckpointFormat: return "CheckpointFormat";
    case ErrorKind::EmptyClassSet: return "EmptyClassSet";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::MissingClass: return "MissingClass";
    case ErrorKind::UndefinedSilhouette: return "UndefinedSilhouette";
    case ErrorKind::UnsupportedSimdLevel: return "UnsupportedSimdLevel";
  }
  return "Unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidTemperature:
    case ErrorKind::BatchTooLarge:
    case ErrorKind::UnsupportedSimdLevel:
      return kExitConfig;
    case ErrorKind::NonFiniteInput:
    case ErrorKind::NormalizationDegenerate:
    case ErrorKind::NonFiniteGradient:
    case ErrorKind::InvalidTargets:
      return kExitNumerical;
    default:
      return kExitData;
  }
}

Error::Error(ErrorKind kind, std::string operation, const std::string& message)
    : std::runtime_error(operation + ": " + std::string(to_string(kind)) +
                         (message.empty() ? "" : ": " + message)),
      kind_(kind),
      operation_(std::move(operation)) {}

}  // namespace cstalign
