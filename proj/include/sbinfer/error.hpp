#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sbinfer {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid scenario, schedule, learner or inference configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Requested inference method is not defined for this problem (e.g. IPW with K != 2).
class UnsupportedMethod : public Error {
public:
    using Error::Error;
};

/// Estimator cannot be evaluated on the data at hand (e.g. an arm never sampled).
class InferenceError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace sbinfer
