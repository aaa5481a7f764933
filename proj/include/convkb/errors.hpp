#pragma once

#include <stdexcept>
#include <string>

namespace convkb {

// Error taxonomy maps onto CLI exit codes: usage/config -> 1, data -> 2,
// numerical -> 3.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace convkb
