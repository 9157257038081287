#pragma once

#include <stdexcept>
#include <string>

namespace hiercore {

// Category of a failure. The CLI maps these onto process exit codes.
enum class ErrorKind {
    usage,       // bad flags or configuration values
    data,        // malformed or inconsistent input data
    version,     // wrong magic / unsupported format version
    io,          // filesystem failures
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

const char* to_string(ErrorKind kind) noexcept;

}  // namespace hiercore
