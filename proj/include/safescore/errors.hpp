#pragma once

#include <stdexcept>
#include <string>

namespace safescore {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration: bad schema, malformed calibration table, out-of-range
// parameters.  The CLI maps this to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// Invalid input data: missing columns, unparseable rows, schema mismatches.
// The CLI maps this to exit code 3.
struct DataError : Error {
    using Error::Error;
};

}  // namespace safescore
