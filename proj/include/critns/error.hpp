#pragma once

#include <stdexcept>
#include <string>

namespace critns {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside an operation's supported domain (negative time, s out of range, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A spectral field breaks a structural invariant (Hermitian symmetry, grid mismatch).
class MalformedField : public Error {
public:
    using Error::Error;
};

/// The smallness condition 4*eta*|y| <= 1 of the contraction lemma fails.
class OutOfRegime : public Error {
public:
    using Error::Error;
};

/// A trajectory does not cover the requested time window.
class CoverageError : public Error {
public:
    using Error::Error;
};

/// Two solution routes cannot be compared (one of them failed).
class IncomparableError : public Error {
public:
    using Error::Error;
};

/// Snapshot file is truncated, has a bad magic, or is otherwise unreadable.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Filesystem read/write failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Configuration text could not be parsed; carries the 1-based line and column.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, int column)
        : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

} // namespace critns
