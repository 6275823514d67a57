#pragma once

#include <stdexcept>
#include <string>

namespace remest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument or model parameter outside its admissible range.
class DomainError : public Error {
public:
    using Error::Error;
};

/// An iterative solver hit its iteration budget before meeting its tolerance.
class NonConvergence : public Error {
public:
    using Error::Error;
};

/// The innovation covariance of a Kalman update is numerically singular.
class SingularInnovation : public Error {
public:
    using Error::Error;
};

/// Quantizer constant not available for the requested source dimension.
class UnknownConstant : public Error {
public:
    using Error::Error;
};

/// Required quantizer rate exceeds the 64-bit cap.
class RateOverflow : public Error {
public:
    using Error::Error;
};

/// A receiver covariance left the structured class it must stay in.
class StructureViolation : public Error {
public:
    StructureViolation(const std::string& what, double deviation)
        : Error(what), deviation_(deviation) {}
    double deviation() const noexcept { return deviation_; }

private:
    double deviation_;
};

/// Bayes normalizer of a belief update vanished (impossible acknowledgment).
class DegenerateBelief : public Error {
public:
    using Error::Error;
};

} // namespace remest
