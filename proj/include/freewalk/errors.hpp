#pragma once

#include <stdexcept>
#include <string>

namespace freewalk {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (bad letters, mass != 1, depth mismatch, ...).
class InputError : public Error {
public:
    using Error::Error;
};

/// A configured budget (support cap, vertex budget) was exceeded.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// A finite-depth germ is too shallow to decide the requested quantity.
class ResolutionError : public Error {
public:
    using Error::Error;
};

/// No geodesic exists between the given boundary points (coincident germs).
class EmptyGeodesicError : public Error {
public:
    using Error::Error;
};

/// Not enough samples in the requested window to fit or test anything.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

} // namespace freewalk
