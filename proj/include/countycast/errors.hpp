#pragma once

#include <stdexcept>
#include <string>

namespace countycast {

// Exit-status contract: problems caused by inputs or usage map to exit 2,
// internal failures (bugs, numeric blowups) to exit 1.

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UsageError : public InputError {
public:
    using InputError::InputError;
};

// A required observation is absent (county/week named in the message).
class MissingDataError : public InputError {
public:
    using InputError::InputError;
};

// Value outside the mathematical domain of an operation (zero users,
// isolated county, ...).
class DomainError : public InputError {
public:
    using InputError::InputError;
};

class InternalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor/matrix dimensions disagree; a programming error, not a data error.
class ShapeError : public InternalError {
public:
    using InternalError::InternalError;
};

class NumericError : public InternalError {
public:
    using InternalError::InternalError;
};

class TrainingError : public InternalError {
public:
    using InternalError::InternalError;
};

} // namespace countycast
