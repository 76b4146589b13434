#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace masorch {

/// Base of every error the engine raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read, written, or renamed.
class IOFailure : public Error {
public:
    using Error::Error;
};

/// Precondition violated by a caller-supplied value.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Malformed textual artifact (labels, config files).
class ParseError : public Error {
public:
    using Error::Error;
};

/// A dataset record violates the sample schema or its invariants.
class SchemaViolation : public Error {
public:
    SchemaViolation(std::size_t line, std::string reason, const std::string& detail)
        : Error("line " + std::to_string(line) + ": " + reason + (detail.empty() ? "" : " (" + detail + ")")),
          line_(line),
          reason_(std::move(reason)) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

/// Model endpoint unreachable, timed out, refused auth, or exhausted retries.
class ApiError : public Error {
public:
    using Error::Error;
};

/// Endpoint answered, but the payload does not follow the chat-completions contract.
class ProtocolError : public Error {
public:
    using Error::Error;
};

}  // namespace masorch
