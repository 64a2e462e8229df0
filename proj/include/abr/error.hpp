#pragma once

#include <stdexcept>
#include <string>

namespace abr {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stored bytes do not match their recorded checksum or digest.
class ChecksumError : public Error {
public:
    using Error::Error;
};

/// Invalid or incomplete run configuration. The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace abr
