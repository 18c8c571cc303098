#pragma once

#include <stdexcept>
#include <string>

namespace pixelnet {

// Error taxonomy: configuration errors are caller mistakes (bad shapes,
// unknown keys), data errors are bad inputs (labels out of range, corrupt
// files), resource errors are budget violations, internal errors are bugs.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct ResourceError : Error {
    using Error::Error;
};

struct InternalError : Error {
    using Error::Error;
};

}  // namespace pixelnet
