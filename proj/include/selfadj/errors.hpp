#pragma once

#include <stdexcept>
#include <string>

namespace selfadj {

/// Base of all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad expression, interval, boundary condition or config.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed to converge or lost accuracy.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

/// Requested combination is outside the supported scope.
class Unsupported : public Error {
public:
    using Error::Error;
};

}  // namespace selfadj
