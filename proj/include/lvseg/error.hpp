#pragma once

#include <stdexcept>
#include <string>

namespace lvseg {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or type invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Sample vector or histogram carries no usable variation.
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// A ray handed to a sampler does not lie in the image plane.
class CoplanarityError : public Error {
public:
    using Error::Error;
};

/// A contour cannot be represented radially about its centroid.
class ParameterizationError : public Error {
public:
    using Error::Error;
};

/// NaN or infinity appeared during an iterative computation.
class NumericError : public Error {
public:
    using Error::Error;
};

/// No admissible candidate shift was found during registration.
class RegistrationError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage failed; carries the stage name for reporting.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace lvseg
