#pragma once

#include <stdexcept>
#include <string>

namespace dctdrift {

// Broad failure classes; the CLI maps each one to its own exit code.
enum class ErrorKind { validation, io, numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class InvalidParameter : public Error {
public:
    explicit InvalidParameter(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(ErrorKind::validation, what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class CorruptCheckpoint : public Error {
public:
    explicit CorruptCheckpoint(const std::string& what) : Error(ErrorKind::io, what) {}
};

class VersionMismatch : public Error {
public:
    explicit VersionMismatch(const std::string& what) : Error(ErrorKind::io, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

class FactorizationError : public NumericError {
public:
    explicit FactorizationError(const std::string& what) : NumericError(what) {}
};

} // namespace dctdrift
