#ifndef RHOTRAJ_ERRORS_HPP
#define RHOTRAJ_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rhotraj {

/// Malformed input file. `what()` carries line or field context.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter violates a model invariant; `field()` names the offender.
class InvariantError : public std::invalid_argument {
public:
    InvariantError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// No trajectory satisfies the constraints of a (sub)problem.
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& message, int window = 0)
        : std::runtime_error(message), window_(window) {}
    /// 1-based RHO window index, 0 when not applicable.
    int window() const noexcept { return window_; }

private:
    int window_;
};

} // namespace rhotraj

#endif
