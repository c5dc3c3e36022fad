#pragma once

#include <stdexcept>
#include <string>

namespace poolwise {

// Base for every error raised by the library. Callers that only need to
// report a failure can catch this; the subclasses map onto HTTP statuses in
// the session service and onto exit codes in the CLI.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid argument values (counts, probabilities, lengths).
class ParameterError : public Error {
public:
    using Error::Error;
};

// A plan or pool that violates the instance's structure (pool cap, depth, ids).
class StructuralError : public Error {
public:
    using Error::Error;
};

// A history that cannot occur under the deterministic test model.
class InconsistencyError : public Error {
public:
    using Error::Error;
};

// Problem size exceeds an exact algorithm's configured cap.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Operation not valid in the current state (e.g. budget exhausted).
class StateError : public Error {
public:
    using Error::Error;
};

}  // namespace poolwise
