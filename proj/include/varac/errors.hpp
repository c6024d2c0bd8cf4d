#pragma once

#include <stdexcept>
#include <string>

namespace varac {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The policy-induced chain has more than one recurrent class.
class NonUnichain : public Error {
public:
    using Error::Error;
};

/// The Poisson system (with its normalization row) is rank deficient.
class SingularSolve : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class IndexOutOfRange : public Error {
public:
    using Error::Error;
};

class NonFiniteEnergy : public Error {
public:
    using Error::Error;
};

/// q(a) = 0 while p(a) > 0 in a KL divergence.
class SupportViolation : public Error {
public:
    using Error::Error;
};

class DivisionBySupportZero : public Error {
public:
    using Error::Error;
};

/// Malformed MDP description (loader or constructor).
class InvalidMdp : public Error {
public:
    using Error::Error;
};

class SpecInvalid : public Error {
public:
    using Error::Error;
};

/// Configuration file problems. `key()` names the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

/// Raised in debug mode when a run-time invariant check fails.
class InvariantViolation : public Error {
public:
    using Error::Error;
};

} // namespace varac
