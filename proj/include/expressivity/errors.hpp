#pragma once

#include <stdexcept>
#include <string>

namespace expressivity {

// Error categories. The CLI maps each category onto its exit code.
enum class ErrorKind {
  kUsage,      // bad arguments, preconditions on counts
  kDimension,  // shape mismatch between operands
  kData,       // bad or inconsistent data values
  kFormat,     // unparsable file contents
  kEncoding,   // attribute value outside its declared domain
  kIngestion,  // missing or unreadable input file
  kNumeric,    // non-finite values or divergence during training
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define EXPRESSIVITY_ERROR_TYPE(Name, Kind)                          \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(Kind, what) {}    \
  };

EXPRESSIVITY_ERROR_TYPE(UsageError, ErrorKind::kUsage)
EXPRESSIVITY_ERROR_TYPE(DimensionError, ErrorKind::kDimension)
EXPRESSIVITY_ERROR_TYPE(DataError, ErrorKind::kData)
EXPRESSIVITY_ERROR_TYPE(FormatError, ErrorKind::kFormat)
EXPRESSIVITY_ERROR_TYPE(EncodingError, ErrorKind::kEncoding)
EXPRESSIVITY_ERROR_TYPE(IngestionError, ErrorKind::kIngestion)
EXPRESSIVITY_ERROR_TYPE(NumericError, ErrorKind::kNumeric)

#undef EXPRESSIVITY_ERROR_TYPE

// Process exit code for an error category: 1 usage, 2 data/format, 3 numeric.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
      return 1;
    case ErrorKind::kNumeric:
      return 3;
    default:
      return 2;
  }
}

// Rethrows `e` with `prefix` prepended to its message, keeping the category.
[[noreturn]] inline void rethrow_annotated(const Error& e,
                                           const std::string& prefix) {
  const std::string what = prefix + e.what();
  switch (e.kind()) {
    case ErrorKind::kUsage:
      throw UsageError(what);
    case ErrorKind::kDimension:
      throw DimensionError(what);
    case ErrorKind::kData:
      throw DataError(what);
    case ErrorKind::kFormat:
      throw FormatError(what);
    case ErrorKind::kEncoding:
      throw EncodingError(what);
    case ErrorKind::kIngestion:
      throw IngestionError(what);
    case ErrorKind::kNumeric:
      throw NumericError(what);
  }
  throw Error(e.kind(), what);
}

}  // namespace expressivity
