#include "betatess/error.hpp"

namespace betatess {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::NonPositiveScale: return "NonPositiveScale";
    case ErrorCode::CoincidentSites: return "CoincidentSites";
    case ErrorCode::Unbounded: return "Unbounded";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::InadmissibleParams: return "InadmissibleParams";
    case ErrorCode::EpsNotDecreasing: return "EpsNotDecreasing";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::NotAVertex: return "NotAVertex";
    case ErrorCode::UnboundedCell: return "UnboundedCell";
    case ErrorCode::WrongSign: return "WrongSign";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::InsufficientSample: return "InsufficientSample";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace betatess
