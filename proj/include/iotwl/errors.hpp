#pragma once

#include <stdexcept>
#include <string>

namespace iotwl {

// User/input errors. The CLI maps these to exit code 2; anything derived
// from std::logic_error is an internal invariant violation and exits 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MalformedFileError : Error {
    using Error::Error;
};

struct SchemaMismatchError : Error {
    using Error::Error;
};

struct InsufficientDataError : Error {
    using Error::Error;
};

struct EmptyValidationError : Error {
    using Error::Error;
};

struct OneSidedDataError : Error {
    using Error::Error;
};

struct InvalidSpecError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

} // namespace iotwl
