#pragma once

#include <stdexcept>
#include <string>

namespace relq {

/// Broad classes of failure. The CLI maps `refusal` to exit code 2 and
/// everything else to 1.
enum class ErrorKind {
    usage,       // bad arguments to an API call or CLI
    parse,       // malformed model or config file
    validation,  // model violates its invariants
    refusal,     // mathematical precondition fails (uncontrollable, no equilibrium, singular block)
    numerical,   // iteration diverged or a post-solve check failed
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string module, const std::string& message)
        : std::runtime_error(message), kind_(kind), module_(std::move(module)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& module() const noexcept { return module_; }
    bool is_refusal() const noexcept { return kind_ == ErrorKind::refusal; }

private:
    ErrorKind kind_;
    std::string module_;
};

class UsageError : public Error {
public:
    UsageError(std::string module, const std::string& message)
        : Error(ErrorKind::usage, std::move(module), message) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& message) : Error(ErrorKind::parse, "model", message) {}
};

class RefusalError : public Error {
public:
    RefusalError(std::string module, const std::string& message)
        : Error(ErrorKind::refusal, std::move(module), message) {}
};

class NumericalError : public Error {
public:
    NumericalError(std::string module, const std::string& message)
        : Error(ErrorKind::numerical, std::move(module), message) {}
};

}  // namespace relq
