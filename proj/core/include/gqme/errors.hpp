#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gqme {

// Bad input: malformed parameters, violated preconditions, unparsable files.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A requested problem does not fit the configured memory/dimension budget.
class BudgetError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// A numerical procedure failed to reach its tolerance.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-fatal diagnostics collected by operations that can emit heuristic warnings.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message)
{
    if (sink) sink->push_back(std::move(message));
}

} // namespace gqme
