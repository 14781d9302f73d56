#pragma once

#include <stdexcept>

namespace hpc {

/// Malformed or unreadable input file. The message always names the path.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file could not be opened, read, or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A configuration violates its documented constraints.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace hpc
