#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dbnkit {

// Base of every error the toolkit throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller supplied something outside an operation's contract.
class InvalidInput : public Error {
public:
    using Error::Error;
};

// Operation not defined for this configuration (e.g. pre-training a model
// without hidden layers).
class Unsupported : public Error {
public:
    using Error::Error;
};

// A computation produced NaN or Inf.
class NumericOverflow : public Error {
public:
    using Error::Error;
};

// Malformed binary stream. `position` is the byte offset where decoding failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t position)
        : Error(what + " (at byte " + std::to_string(position) + ")"), position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

// Malformed text input. `line` is 1-based.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Filesystem failure.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace dbnkit
