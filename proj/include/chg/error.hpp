#pragma once

#include <stdexcept>
#include <string>

namespace chg {

enum class ErrorKind {
    domain,
    capability,
    accuracy,
    spec_mismatch,
    singularity,
    data,
    construction,
    usage,
    io
};

const char* to_string(ErrorKind k);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Thrown when a quadrature fails to reach its target; carries the residual it did reach.
class AccuracyError : public Error {
public:
    AccuracyError(const std::string& what, double residual)
        : Error(ErrorKind::accuracy, what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

[[noreturn]] inline void fail(ErrorKind k, const std::string& msg) { throw Error(k, msg); }

inline void require(bool cond, ErrorKind k, const std::string& msg) {
    if (!cond) fail(k, msg);
}

}  // namespace chg
