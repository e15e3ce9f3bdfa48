#pragma once

#include <stdexcept>
#include <string>

namespace mfnet {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// A layer has zero L2 norm, so balancing (and anything built on it) is undefined.
class ZeroLayer : public Error {
public:
    using Error::Error;
};

class ArchitectureMismatch : public Error {
public:
    using Error::Error;
};

class DepthMismatch : public Error {
public:
    using Error::Error;
};

class ArityMismatch : public Error {
public:
    using Error::Error;
};

/// Maurey sampling needs a source with positive path proxy.
class DegenerateNet : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace mfnet
