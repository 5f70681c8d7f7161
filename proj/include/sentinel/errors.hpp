#pragma once

#include <stdexcept>
#include <string>

namespace sentinel {

// Base of every error raised by the toolkit. Subclasses map onto the CLI
// exit-code classes through `is_io_error()`.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual bool is_io_error() const noexcept { return false; }
};

#define SENTINEL_DEFINE_ERROR(Name)                \
  class Name : public Error {                      \
   public:                                         \
    using Error::Error;                            \
  }

SENTINEL_DEFINE_ERROR(ValidationError);
SENTINEL_DEFINE_ERROR(FormatError);
SENTINEL_DEFINE_ERROR(TruncationError);
SENTINEL_DEFINE_ERROR(ConfigError);
SENTINEL_DEFINE_ERROR(InvariantError);
SENTINEL_DEFINE_ERROR(DegenerateRow);
SENTINEL_DEFINE_ERROR(DegenerateVariance);
SENTINEL_DEFINE_ERROR(MissingHeadError);
SENTINEL_DEFINE_ERROR(InputError);
SENTINEL_DEFINE_ERROR(EmptyStateError);
SENTINEL_DEFINE_ERROR(UndefinedMetric);

#undef SENTINEL_DEFINE_ERROR

class IoError : public Error {
 public:
  using Error::Error;
  bool is_io_error() const noexcept override { return true; }
};

}  // namespace sentinel
