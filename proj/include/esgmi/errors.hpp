#pragma once

#include <stdexcept>
#include <string>

namespace esgmi {

// Bad arguments, malformed configuration, invalid flag combinations. CLI exit code 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Problems with the data itself: parse failures, ragged rows, unfittable
// columns, empty donor pools. CLI exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failures. CLI exit code 2.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace esgmi
