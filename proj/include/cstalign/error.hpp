#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cstalign {

enum class ErrorKind {
  InvalidConcept,
  DuplicateConcept,
  MissingDescription,
  EmptySpec,
  InsufficientSamples,
  ParseError,
  DanglingReference,
  InvalidConfig,
  ConfigError,
  NonFiniteInput,
  NormalizationDegenerate,
  MeanOfEmptySet,
  ShapeError,
  DuplicateClassInBatch,
  BatchTooLarge,
  InvalidTemperature,
  InvalidTargets,
  NonFiniteGradient,
  IoError,
  CheckpointFormat,
  EmptyClassSet,
  EmptySet,
  MissingClass,
  UndefinedSilhouette,
  UnsupportedSimdLevel,
};

std::string_view to_string(ErrorKind kind);

// Process exit codes used by the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

// Config-shaped errors map to 2, numerical failures to 4, everything else
// (bad input files, missing classes, ...) to 3.
int exit_code(ErrorKind kind);

/// Exception carrying a machine-readable kind and the operation that raised it,
/// e.g. "soft-target/build_soft_label_matrix". what() renders both.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string operation, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& operation() const noexcept { return operation_; }

 private:
  ErrorKind kind_;
  std::string operation_;
};

}  // namespace cstalign
