#pragma once

#include <stdexcept>
#include <string>

namespace bsde {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameter or argument outside the operation's domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Malformed ensemble file or CSV (bad magic, version, header).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Payload size disagrees with the header.
class LengthError : public Error {
public:
    using Error::Error;
};

class SingularSystemError : public Error {
public:
    using Error::Error;
};

/// Non-finite value produced during a computation.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// An internal invariant (e.g. Bihari ordering) failed beyond tolerance.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace bsde
