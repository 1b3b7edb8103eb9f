#pragma once

#include <stdexcept>
#include <string>

namespace looplab {

// Error kinds shared by all modules. The CLI maps them to exit codes:
// ParseError -> 1, RegimeError/ResourceError/ConvergenceError -> 2.

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ShadingError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ParseError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct CompositionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct InversionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ClosureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RegimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};
struct PoleError : std::domain_error {
  using std::domain_error::domain_error;
};
struct BranchError : std::domain_error {
  using std::domain_error::domain_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace looplab
