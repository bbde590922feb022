#pragma once

#include <stdexcept>
#include <string>

namespace t2g {

/// Base class of everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dimension disagreement between operands (matrix shapes, grid sizes, ...).
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// Mathematically invalid input (non-finite values, out-of-range scalars).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

/// Malformed payload content: out-of-range labels, infeasible sampling
/// requests, inconsistent manifests.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

/// Evaluation-protocol preconditions violated (window longer than the video,
/// no usable reference frame, ...).
class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& msg) : Error(msg) {}
};

/// File I/O failures, with a kind so callers can distinguish the named
/// tensor-format error cases.
class IoError : public Error {
public:
    enum class Kind {
        OpenFailed,
        WriteFailed,
        BadMagic,
        BadVersion,
        BadDtype,
        BadHeader,
        Truncated,
    };

    IoError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// A numeric check or training run failed (grad-check above tolerance,
/// divergence). The CLI maps this to its own exit code.
class CheckError : public Error {
public:
    explicit CheckError(const std::string& msg) : Error(msg) {}
};

} // namespace t2g
