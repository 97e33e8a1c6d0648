#pragma once

#include <stdexcept>
#include <string>

namespace adawave {

/// Root of every error the library raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes or configuration values that do not conform.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Malformed, missing or inconsistent input data.
class DataError : public Error {
public:
    using Error::Error;
};

/// Non-finite values or a diverged optimization.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Misuse of the autodiff tape (non-scalar loss, consumed tape, ...).
class TapeError : public Error {
public:
    using Error::Error;
};

} // namespace adawave
