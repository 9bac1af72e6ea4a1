#pragma once

#include <stdexcept>
#include <string>

namespace momenta {

// Runtime failure with a machine-parsable class tag. The CLI prints the tag
// as `error: <class>: <detail>` and maps the exception type to an exit code.
class Error : public std::runtime_error {
public:
    Error(std::string error_class, const std::string& detail)
        : std::runtime_error(error_class + ": " + detail),
          error_class_(std::move(error_class)) {}

    const std::string& error_class() const noexcept { return error_class_; }

private:
    std::string error_class_;
};

// Invalid configuration or arguments (exit code 3 at the CLI).
class ConfigError : public Error {
public:
    ConfigError(std::string error_class, const std::string& detail)
        : Error(std::move(error_class), detail) {}
};

}  // namespace momenta
