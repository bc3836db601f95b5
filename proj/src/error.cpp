#include "ma2gcn/error.hpp"

namespace ma2gcn {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::MalformedRecord: return "MalformedRecord";
  case ErrorKind::OutOfRangeField: return "OutOfRangeField";
  case ErrorKind::EmptyDataset: return "EmptyDataset";
  case ErrorKind::OutOfBounds: return "OutOfBounds";
  case ErrorKind::EmptyInput: return "EmptyInput";
  case ErrorKind::ShapeMismatch: return "ShapeMismatch";
  case ErrorKind::NotScalar: return "NotScalar";
  case ErrorKind::NotSymmetric: return "NotSymmetric";
  case ErrorKind::NegativeEntry: return "NegativeEntry";
  case ErrorKind::ConfigMismatch: return "ConfigMismatch";
  case ErrorKind::TooShort: return "TooShort";
  case ErrorKind::TooFew: return "TooFew";
  case ErrorKind::Divergence: return "Divergence";
  case ErrorKind::ConfigError: return "ConfigError";
  case ErrorKind::IoError: return "IoError";
  case ErrorKind::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string &what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

} // namespace ma2gcn
