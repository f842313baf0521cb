#pragma once

#include <stdexcept>
#include <string>

namespace valstudy {

/// Base class for all library errors. `exit_code()` maps onto the CLI's
/// process status.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Invalid or inconsistent configuration (bad parameter, missing table entry).
class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Input data violates a schema or domain requirement.
class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Estimation failed: rank deficiency, zero variance, singular covariance.
class NumericalError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

}  // namespace valstudy
