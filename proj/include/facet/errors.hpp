#pragma once

#include <stdexcept>
#include <string>

namespace facet {

// Error categories double as CLI exit codes.
enum class ErrorCategory : int { config = 2, data = 3, numeric = 4, io = 5 };

class Error : public std::runtime_error {
public:
  Error(ErrorCategory cat, const std::string& msg) : std::runtime_error(msg), cat_(cat) {}
  ErrorCategory category() const noexcept { return cat_; }

private:
  ErrorCategory cat_;
};

// Bad wiring: dimension chains, unknown config keys, head-kind mismatches.
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorCategory::config, m) {}
};

// Tensor/vector shape disagreement.
struct ShapeError : ConfigError {
  explicit ShapeError(const std::string& m) : ConfigError(m) {}
};

// API misuse, e.g. consuming a gradient tape twice.
struct UsageError : ConfigError {
  explicit UsageError(const std::string& m) : ConfigError(m) {}
};

// Malformed or out-of-contract input data.
struct DataError : Error {
  explicit DataError(const std::string& m) : Error(ErrorCategory::data, m) {}
};

struct ParseError : DataError {
  explicit ParseError(const std::string& m) : DataError(m) {}
};

// Degenerate point configurations in alignment.
struct GeometryError : DataError {
  explicit GeometryError(const std::string& m) : DataError(m) {}
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ErrorCategory::numeric, m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorCategory::io, m) {}
};

// Model-bundle file corruption, one type per failure mode so callers can
// tell them apart.
struct BadMagicError : IoError {
  explicit BadMagicError(const std::string& m) : IoError(m) {}
};
struct BundleVersionError : IoError {
  explicit BundleVersionError(const std::string& m) : IoError(m) {}
};
struct TruncatedBundleError : IoError {
  explicit TruncatedBundleError(const std::string& m) : IoError(m) {}
};
struct BundleMetadataError : IoError {
  explicit BundleMetadataError(const std::string& m) : IoError(m) {}
};

}  // namespace facet
