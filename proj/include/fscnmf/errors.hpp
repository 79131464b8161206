#ifndef FSCNMF_ERRORS_HPP
#define FSCNMF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fscnmf {

// Base for everything this library throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dimension or index disagreement between operands.
struct ShapeError : Error {
    using Error::Error;
};

// Malformed text input; message carries the offending line number.
struct ParseError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Invalid parameter value (out-of-range hyperparameter, bad grid, ...).
struct ParamError : Error {
    using Error::Error;
};

// Input data violates a documented invariant (negative weight, missing label, ...).
struct ValidationError : Error {
    using Error::Error;
};

// Pivot collapsed during elimination; the system has no usable inverse.
struct SingularMatrixError : Error {
    using Error::Error;
};

// Iterative routine ran out of sweeps; `residual` is the last observed value.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& what, double residual_)
        : Error(what), residual(residual_) {}
    double residual;
};

}  // namespace fscnmf

#endif
