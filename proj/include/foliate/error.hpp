#pragma once

#include <stdexcept>
#include <string>

namespace foliate {

// Base of every error raised by the library. Callers that only need to
// report failures can catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid user input: schedules, modes, malformed files.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A positive margin (rank margin, inflation margin) collapsed to zero.
class DegenerateMargin : public Error {
public:
    using Error::Error;
};

}  // namespace foliate
