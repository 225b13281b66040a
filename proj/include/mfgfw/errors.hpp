#pragma once

#include <stdexcept>
#include <string>

namespace mfgfw {

// A caller broke a documented precondition (bad control bound, invalid kernel, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Invalid user-facing configuration (CLI flags, presets, mesh sizes).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An iterative sub-solver did not reach its tolerance within its iteration cap.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical step produced no finite value (e.g. empty control ball).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mfgfw
