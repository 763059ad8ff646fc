#pragma once

#include <stdexcept>
#include <string>

namespace pil {

enum class ErrorKind {
  ChartOverflow,
  DegenerateMetric,
  NonFiniteInput,
  NewtonDiverged,
  FoldedMap,
  EllipticNoConverge,
  SingularInverse,
  NegativeEigenvalue,
  IncompatibleData,
  TransversalityLoss,
  StepRejected,
  FilterContamination,
  ParseError,
  ValidationError,
  IoError,
  VersionMismatch,
};

const char* kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string path = {})
      : std::runtime_error(message), kind_(kind), path_(std::move(path)) {}

  ErrorKind kind() const { return kind_; }
  // Config field path or file path the error refers to; empty when not applicable.
  const std::string& path() const { return path_; }

  std::string to_json() const;

 private:
  ErrorKind kind_;
  std::string path_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message, std::string path = {}) {
  throw Error(kind, message, std::move(path));
}

}  // namespace pil
