#include "pil/error.hpp"

#include <json.hpp>

namespace pil {

const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ChartOverflow: return "ChartOverflow";
    case ErrorKind::DegenerateMetric: return "DegenerateMetric";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::NewtonDiverged: return "NewtonDiverged";
    case ErrorKind::FoldedMap: return "FoldedMap";
    case ErrorKind::EllipticNoConverge: return "EllipticNoConverge";
    case ErrorKind::SingularInverse: return "SingularInverse";
    case ErrorKind::NegativeEigenvalue: return "NegativeEigenvalue";
    case ErrorKind::IncompatibleData: return "IncompatibleData";
    case ErrorKind::TransversalityLoss: return "TransversalityLoss";
    case ErrorKind::StepRejected: return "StepRejected";
    case ErrorKind::FilterContamination: return "FilterContamination";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
  }
  return "Unknown";
}

std::string Error::to_json() const {
  nlohmann::json j;
  j["error"] = kind_name(kind_);
  j["message"] = what();
  if (!path_.empty()) j["path"] = path_;
  return j.dump();
}

}  // namespace pil
