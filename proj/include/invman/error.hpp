#pragma once

#include <stdexcept>
#include <string>

namespace invman {

enum class ErrorKind {
    invalid_argument,
    assumption_violation,
    numeric_failure,
    not_an_eigenvalue,
    invalid_shift,
    refused,
    horizon_too_short,
    non_convergence,
    divergence_detected,
    insufficient_data,
    empty_branch,
    side_missing,
    incomplete_multiplicity,
    io,
    config,
};

const char* kind_name(ErrorKind k);

/** Every failure raised by the library carries one of the kinds above. */
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(std::string(kind_name(kind)) + ": " + msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

/** Extra payload for failures that carry a number (node index, residual, suggested horizon). */
class ValueError : public Error {
  public:
    ValueError(ErrorKind kind, const std::string& msg, double value)
        : Error(kind, msg), value_(value) {}
    double value() const { return value_; }

  private:
    double value_;
};

inline const char* kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::assumption_violation: return "assumption-violation";
        case ErrorKind::numeric_failure: return "numeric-failure";
        case ErrorKind::not_an_eigenvalue: return "not-an-eigenvalue";
        case ErrorKind::invalid_shift: return "invalid-shift";
        case ErrorKind::refused: return "refused";
        case ErrorKind::horizon_too_short: return "horizon-too-short";
        case ErrorKind::non_convergence: return "non-convergence";
        case ErrorKind::divergence_detected: return "divergence-detected";
        case ErrorKind::insufficient_data: return "insufficient-data";
        case ErrorKind::empty_branch: return "empty-branch";
        case ErrorKind::side_missing: return "side-missing";
        case ErrorKind::incomplete_multiplicity: return "incomplete-multiplicity";
        case ErrorKind::io: return "io";
        case ErrorKind::config: return "config";
    }
    return "unknown";
}

}  // namespace invman
