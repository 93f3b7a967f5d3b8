#pragma once

#include <stdexcept>
#include <string>

namespace flowgate {

// Base for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration, bad CLI input, unresolved references. Maps to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Vector dimensions disagree (embeddings, queries, pools).
class DimensionError : public Error {
public:
    using Error::Error;
};

// Generation or embedding service failure (transport, bad payload, ...).
class BackendError : public Error {
public:
    using Error::Error;
};

// A backend id that is not present in the registry.
class UnknownBackendError : public BackendError {
public:
    using BackendError::BackendError;
};

// Scripted backend asked for a request it has no recorded response for.
class FixtureMissingError : public BackendError {
public:
    using BackendError::BackendError;
};

// An operation was called outside its contract (violated precondition).
class ContractError : public Error {
public:
    using Error::Error;
};

// Malformed input file (pool, dataset, transcript, trajectory).
class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace flowgate
