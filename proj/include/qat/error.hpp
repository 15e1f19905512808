#pragma once

#include <stdexcept>
#include <string>

namespace qat {

/// Exception carrying the pipeline stage in which a failure occurred.
class Error : public std::runtime_error {
public:
    Error(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Invalid input to an operation (bad covariance, inverted interval, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// The requested computation does not fit on the supplied grid.
class GridError : public Error {
public:
    using Error::Error;
};

/// Physical regime does not admit the requested construction.
class RegimeError : public Error {
public:
    using Error::Error;
};

}  // namespace qat
