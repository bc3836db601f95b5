#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ma2gcn {

enum class ErrorKind {
  MalformedRecord,
  OutOfRangeField,
  EmptyDataset,
  OutOfBounds,
  EmptyInput,
  ShapeMismatch,
  NotScalar,
  NotSymmetric,
  NegativeEntry,
  ConfigMismatch,
  TooShort,
  TooFew,
  Divergence,
  ConfigError,
  IoError,
  ValidationError,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what);

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

} // namespace ma2gcn
