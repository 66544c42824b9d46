#pragma once

#include <stdexcept>
#include <string>

namespace locenc {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// geo
class RangeError : public Error {
public:
    using Error::Error;
};
class NonFiniteError : public Error {
public:
    using Error::Error;
};

// encoders / synth / config values
class DomainError : public Error {
public:
    using Error::Error;
};
class MissingAuxError : public Error {
public:
    using Error::Error;
};
class EmptyDatasetError : public Error {
public:
    using Error::Error;
};

// nn
class ShapeError : public Error {
public:
    using Error::Error;
};
class IndexError : public Error {
public:
    using Error::Error;
};
class NaNGradError : public Error {
public:
    using Error::Error;
};

// dataset I/O
class SchemaError : public Error {
public:
    using Error::Error;
};
class ParseError : public Error {
public:
    using Error::Error;
};
class JoinError : public Error {
public:
    using Error::Error;
};
class DegenerateDatasetError : public Error {
public:
    using Error::Error;
};

// geobias
class ZeroVarianceError : public Error {
public:
    using Error::Error;
};
class TooFewPointsError : public Error {
public:
    using Error::Error;
};
class NoLowPerfError : public Error {
public:
    using Error::Error;
};

// cli
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace locenc
