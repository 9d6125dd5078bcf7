#pragma once

#include <stdexcept>
#include <string>

namespace dsagg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unsupported configuration (bad family parameters, unknown tags, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Parameter outside the mathematical domain of a map (e.g. beta >= 1 in GARCH).
class DomainError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

/// Model has no stationary L2 solution at the requested environment point.
class ExistenceError : public Error {
public:
    using Error::Error;
};

/// A recursive simulation exceeded its divergence guard.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Requested computation exceeds a configured resource budget.
class ResourceError : public Error {
public:
    using Error::Error;
};

}  // namespace dsagg
