#pragma once

#include <stdexcept>
#include <string>

namespace mstates {

// Error taxonomy mirrors the CLI exit codes: config errors exit 2,
// data parse/validation errors exit 3, numerical failures exit 4.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace mstates
