#pragma once

#include <stdexcept>
#include <string>

namespace multilevel {

/// Bad user input: malformed config file, missing fields, invalid CLI flags.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Projected simulation cost exceeds the configured budget cap.
struct BudgetExceeded : std::runtime_error {
    explicit BudgetExceeded(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure at run time: non-finite samples, size overflow,
/// unusable regime for a formula.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// An allocation fraction collapsed to zero (zero strong-error constant or
/// an exactly-zero cumulative weight).
struct DegenerateAllocation : NumericalError {
    explicit DegenerateAllocation(const std::string& what) : NumericalError(what) {}
};

/// A pilot estimate whose standard error exceeds the estimate itself.
struct InsufficientPilot : NumericalError {
    explicit InsufficientPilot(const std::string& what) : NumericalError(what) {}
};

}  // namespace multilevel
