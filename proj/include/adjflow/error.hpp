#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace adjflow {

/// Base of every exception thrown by the core library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (JSON syntax, wrong value types).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed input that violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

class SingularSystem : public SolverError {
public:
    using SolverError::SolverError;
};

class NewtonDiverged : public SolverError {
public:
    NewtonDiverged(const std::string& what, std::vector<double> trace)
        : SolverError(what), trace_(std::move(trace)) {}

    /// Residual norms, one per Newton iterate.
    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

/// A mesh deformation produced a triangle whose area fell below the floor.
class InvertedElement : public Error {
public:
    InvertedElement(const std::string& what, std::size_t triangle)
        : Error(what), triangle_(triangle) {}

    std::size_t triangle() const noexcept { return triangle_; }

private:
    std::size_t triangle_;
};

} // namespace adjflow
