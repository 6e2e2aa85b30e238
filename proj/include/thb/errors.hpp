#pragma once

#include <stdexcept>
#include <string>

namespace thb {

/// Malformed arguments: unsorted breaks, indices out of range, bad parameters.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Evaluation point outside the parametric domain.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A hierarchical mesh violates one of the numbered mesh assumptions
/// (1: bisection, 2: two-level grading, 3: wide refinement, 4: unique
/// projection elements, 5: spline-support domains, 6: connected overlaps,
/// 7: cubic block alignment).
class MeshAssumptionError : public std::runtime_error {
public:
    MeshAssumptionError(int assumption, const std::string& what)
        : std::runtime_error("assumption " + std::to_string(assumption) + " violated: " + what),
          assumption_(assumption) {}

    int assumption() const noexcept { return assumption_; }

private:
    int assumption_;
};

/// Something that the mathematics guarantees cannot happen did happen.
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed input file; carries the 1-based line and column when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, int line = 0, int column = 0)
        : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ", column " +
                                            std::to_string(column) + ")"
                                      : what),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

} // namespace thb
