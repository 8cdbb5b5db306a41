#pragma once

#include <stdexcept>
#include <string>

namespace eapcr {

// Root of every error the library throws. The CLI maps `numeric()` errors to
// exit status 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual bool numeric() const noexcept { return false; }
};

#define EAPCR_DEFINE_ERROR(Name)          \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  };

EAPCR_DEFINE_ERROR(DimensionError)
EAPCR_DEFINE_ERROR(LookupError)
EAPCR_DEFINE_ERROR(ContractError)
EAPCR_DEFINE_ERROR(StateError)
EAPCR_DEFINE_ERROR(ConfigError)
EAPCR_DEFINE_ERROR(DataError)
EAPCR_DEFINE_ERROR(SchemaError)
EAPCR_DEFINE_ERROR(FitError)
EAPCR_DEFINE_ERROR(ImputationError)
EAPCR_DEFINE_ERROR(FormatError)
EAPCR_DEFINE_ERROR(IntegrityError)
EAPCR_DEFINE_ERROR(UndefinedMetricError)

#undef EAPCR_DEFINE_ERROR

/// Non-finite values, diverging training, singular solves.
class NumericError : public Error {
 public:
  using Error::Error;
  bool numeric() const noexcept override { return true; }
};

class SolverError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace eapcr
