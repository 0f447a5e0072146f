#pragma once

#include <stdexcept>
#include <string>

namespace quantot {

// Precondition violated by the caller (shape mismatch, bad weights, k > n, ...).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed external data (CSV, PGM).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A solver produced non-finite values or failed to certify its output.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace quantot
