// errors.hpp -- exception taxonomy shared by all modules
#pragma once

#include <stdexcept>
#include <string>

namespace bdcl {

// Base class so callers can catch anything thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible matrix shapes fed to a numeric operation.
struct DimensionError : Error {
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Invalid sizes/values in a user-facing configuration.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// An API precondition was violated (e.g. backward from a non-scalar).
struct ContractError : Error {
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

// A loss or weight became NaN/Inf during training.
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// File-level I/O failures (missing file, unwritable directory).
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Dataset files disagree with their manifest.
struct DataIntegrityError : Error {
  explicit DataIntegrityError(const std::string& msg) : Error(msg) {}
};

// Checkpoint failure modes are distinct so callers can react to each.
struct CheckpointVersionError : Error {
  explicit CheckpointVersionError(const std::string& msg) : Error(msg) {}
};
struct CheckpointCorruptError : Error {
  explicit CheckpointCorruptError(const std::string& msg) : Error(msg) {}
};

}  // namespace bdcl
