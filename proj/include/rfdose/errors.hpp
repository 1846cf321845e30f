#pragma once

#include <stdexcept>
#include <string>

namespace rfdose {

// Error classes map 1:1 to CLI exit codes.
enum class ErrorClass {
    usage = 1,
    io = 2,
    domain = 3,
    numeric = 4,
    convergence = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& msg) : std::runtime_error(msg), cls_(cls) {}
    ErrorClass cls() const { return cls_; }

private:
    ErrorClass cls_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error(ErrorClass::usage, msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(ErrorClass::io, msg) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(ErrorClass::domain, msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(ErrorClass::numeric, msg) {}
};

struct ConvergenceError : Error {
    explicit ConvergenceError(const std::string& msg) : Error(ErrorClass::convergence, msg) {}
};

} // namespace rfdose
