// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gobi {

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Text-format parse failure with a 1-based source position.
class ParseError : public Error
{
public:
    enum class Kind
    {
        syntax,
        unknown_identifier,
        unsupported,
    };

    ParseError(Kind kind, uint32_t line, uint32_t column, const std::string& message);

    Kind kind() const noexcept { return kind_; }
    uint32_t line() const noexcept { return line_; }
    uint32_t column() const noexcept { return column_; }
    /// Message without the position prefix.
    const std::string& message() const noexcept { return message_; }

private:
    Kind kind_;
    uint32_t line_;
    uint32_t column_;
    std::string message_;
};

/// Binary-format decode failure. `offset` is the byte position of the problem.
class DecodeError : public Error
{
public:
    DecodeError(size_t offset, const std::string& message);

    size_t offset() const noexcept { return offset_; }
    const std::string& message() const noexcept { return message_; }

private:
    size_t offset_;
    std::string message_;
};

/// A module rejected by validate(); what() holds the joined diagnostics.
class ValidationError : public Error
{
public:
    using Error::Error;
};

class InstantiationError : public Error
{
public:
    using Error::Error;
};

/// An ExecConfig that breaks its invariants (e.g. unchecked without the unsafe flag).
class ConfigError : public Error
{
public:
    using Error::Error;
};

/// Caller errors on invoke: distinct from a trap raised by sandboxed code.
class InvokeError : public Error
{
public:
    enum class Kind
    {
        unknown_export,
        not_a_function,
        argument_mismatch,
        reentrancy,
    };

    InvokeError(Kind kind, const std::string& message) : Error{message}, kind_{kind} {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Host-side access to linear memory outside its bounds.
class OutOfBoundsError : public Error
{
public:
    using Error::Error;
};

/// An interpreter invariant was violated. Validated modules must never
/// produce this; it exists so tests can detect such a bug.
class InternalError : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

}  // namespace gobi
