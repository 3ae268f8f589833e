#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fvr {

/// Base class for all errors raised by the library. The CLI maps any Error to
/// a one-line `error: <kind>: <detail>` message on stderr and a nonzero exit.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& detail)
        : std::runtime_error(kind + ": " + detail), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class InvalidInputError : public Error {
public:
    explicit InvalidInputError(const std::string& detail) : Error("invalid-input", detail) {}
};

/// A rank store is missing (ranker, query) pairs required by the closed-world
/// invariant; the message lists the offenders.
class IncompleteStoreError : public Error {
public:
    explicit IncompleteStoreError(const std::string& detail) : Error("incomplete-store", detail) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& detail) : Error("parse", detail) {}
};

class UnknownItemError : public Error {
public:
    explicit UnknownItemError(const std::string& detail) : Error("unknown-item", detail) {}
};

/// Persisted artifact cannot be read back: bad magic, version or content-hash
/// mismatch, or truncated/corrupt payload.
class LoadError : public Error {
public:
    explicit LoadError(const std::string& detail) : Error("load", detail) {}
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& detail) : Error("usage", detail) {}
};

} // namespace fvr
