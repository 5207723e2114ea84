#pragma once

#include <stdexcept>
#include <string>

namespace cbsde {

// Invalid user-supplied input: bad parameters, malformed configs, unsupported
// operation requests. Maps to CLI exit code 2.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what_arg)
        : std::invalid_argument(what_arg) {}
};

// A request whose node count would be intractable (2^N blowup).
class SizeError : public ValidationError {
public:
    explicit SizeError(const std::string& what_arg) : ValidationError(what_arg) {}
};

// The penalty-weight ladder was exhausted before successive iterates settled.
// Carries diagnostics so callers can distinguish slow convergence from a
// genuinely infeasible constraint. Maps to CLI exit code 3.
class NonConvergenceError : public std::runtime_error {
public:
    NonConvergenceError(const std::string& what_arg, double gap_arg, double m_last_arg)
        : std::runtime_error(what_arg), gap(gap_arg), m_last(m_last_arg) {}
    double gap;
    double m_last;
};

// Penalized values blew past the magnitude guard, or the penalized objective
// is unbounded below: the constraint admits no supersolution for this claim
// (or the problem is wildly scaled). Maps to CLI exit code 4.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what_arg, double magnitude_arg, double penalty_m_arg)
        : std::runtime_error(what_arg), magnitude(magnitude_arg), penalty_m(penalty_m_arg) {}
    double magnitude;
    double penalty_m;
};

}  // namespace cbsde
