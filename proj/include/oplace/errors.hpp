#pragma once

#include <stdexcept>
#include <string>

namespace oplace {

// Invalid input data or schema problems in a config file. CLI exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A documented precondition of an operation does not hold. CLI exit code 3.
struct PreconditionError : std::runtime_error {
    explicit PreconditionError(const std::string& msg) : std::runtime_error(msg) {}
};

// A numerical procedure could not complete (root not bracketed, ...). CLI exit code 4.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace oplace
