#pragma once

#include <stdexcept>
#include <string>

namespace doaiq {

// Bad user input: dimensions, bounds, malformed options.  CLI exit code 2.
class ParameterError : public std::runtime_error {
public:
    explicit ParameterError(const std::string& what) : std::runtime_error(what) {}
};

// Cross-array (or similar) size exceeding a configured cap.
class CapacityError : public ParameterError {
public:
    explicit CapacityError(const std::string& what) : ParameterError(what) {}
};

// Numerical trouble: degenerate designs, failed factorizations.  CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

class DegenerateDesignError : public NumericalError {
public:
    explicit DegenerateDesignError(const std::string& what) : NumericalError(what) {}
};

class ConditioningError : public NumericalError {
public:
    explicit ConditioningError(const std::string& what) : NumericalError(what) {}
};

// File problems.  CLI exit code 4.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace doaiq
