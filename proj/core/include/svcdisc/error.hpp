// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace svcdisc {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. `location()` is a byte offset or a document path.
class ParseError : public Error {
public:
    ParseError(std::string location, const std::string& message)
        : Error(location.empty() ? message : location + ": " + message),
          location_(std::move(location)) {}
    const std::string& location() const noexcept { return location_; }

private:
    std::string location_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

/// Invalid parameters or parameter combinations.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A provider could not be reached or kept failing after all retries.
class TransportError : public Error {
public:
    using Error::Error;
};

/// A provider answered, but with unusable content (empty, wrong shape).
class ContentError : public Error {
public:
    using Error::Error;
};

/// A provider broke its declared contract, e.g. returned the wrong dimension.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Operation not allowed in the object's current state.
class StateError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Benchmark generation gave up after exhausting its retry budget.
class GenerationError : public Error {
public:
    using Error::Error;
};

/// Generation stopped early; progress up to the last validated artifact is
/// in the checkpoint directory and a rerun with the same directory resumes.
class ResumableError : public Error {
public:
    ResumableError(const std::string& message, std::string checkpoint)
        : Error(message + " (resume from " + checkpoint + ")"), checkpoint_(std::move(checkpoint)) {}
    const std::string& checkpoint() const noexcept { return checkpoint_; }

private:
    std::string checkpoint_;
};

/// Loading a stored artifact failed schema validation.
class LoadError : public Error {
public:
    LoadError(std::string location, const std::string& message)
        : Error(location + ": " + message), location_(std::move(location)) {}
    const std::string& location() const noexcept { return location_; }

private:
    std::string location_;
};

}  // namespace svcdisc
