#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ebound {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Division by zero, square root of a negative number, or a derivative
/// requested where the expression is singular. `node` is the infix form of
/// the offending subexpression.
class DomainError : public Error {
public:
    DomainError(const std::string& what, std::string node)
        : Error(what + " at `" + node + "`"), node_(std::move(node)) {}
    const std::string& node() const noexcept { return node_; }

private:
    std::string node_;
};

/// A max/min/abs node is tied at the query point, so no classical gradient
/// exists there.
class NonsmoothError : public Error {
public:
    explicit NonsmoothError(std::string node)
        : Error("nonsmooth point: tie at `" + node + "`"), node_(std::move(node)) {}
    const std::string& node() const noexcept { return node_; }

private:
    std::string node_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class ArityError : public Error {
public:
    using Error::Error;
};

/// Branch enumeration of the subdifferential exceeded the configured cap.
class SelectionCapError : public Error {
public:
    using Error::Error;
};

/// Exponent or error-bound fit could not be produced.
class FitError : public Error {
public:
    enum class Kind { not_radius_stable, degenerate_window, nothing_to_fit, bad_input };
    FitError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Reading or writing a file failed.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace ebound
