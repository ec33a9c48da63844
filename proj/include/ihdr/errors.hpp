#pragma once

#include <stdexcept>
#include <string>

namespace ihdr {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument or violated precondition (bad dims, out-of-range parameter).
class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

// Malformed file content. Carries a byte offset when one is known.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg), offset_(-1) {}
    ParseError(const std::string& msg, long long byte_offset)
        : Error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}
    long long byte_offset() const { return offset_; }

private:
    long long offset_;
};

// Numerical failure: non-finite values, degenerate solves, failed checks.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

} // namespace ihdr
