#pragma once

#include <stdexcept>

// Error taxonomy shared by all modules. The CLI maps these onto exit codes:
// IoError -> 2, EmptyAfterFilter -> 3, NonFiniteGradient -> 4, and the
// schema/validation family -> 5.
namespace aepo {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleRollout : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GroupTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteGradient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyAfterFilter : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyDataset : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TooFewRuns : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace aepo
