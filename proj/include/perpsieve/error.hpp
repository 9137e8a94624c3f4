#pragma once

#include <stdexcept>
#include <string>

namespace perpsieve {

enum class ErrorKind {
    InvalidArgument,
    DataValidation,
    Numerical,
    Io,
    Schema,
};

// Single exception type for the core; the kind drives C API status codes and CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace perpsieve
