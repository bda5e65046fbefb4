#pragma once

#include <stdexcept>
#include <string>

namespace penmix {

// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input data problems. The CLI maps these to exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public InputError {
public:
    using InputError::InputError;
};

class ConstantColumn : public InputError {
public:
    explicit ConstantColumn(long column)
        : InputError("column " + std::to_string(column) + " is constant"), column_(column) {}
    long column() const noexcept { return column_; }

private:
    long column_;
};

class InvalidResponse : public InputError {
public:
    using InputError::InputError;
};

class EmptySet : public InputError {
public:
    using InputError::InputError;
};

// Numerical failures. The CLI maps these to exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularSystem : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class AllStartsFailed : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace penmix
