#pragma once

#include <stdexcept>
#include <string>

namespace genesys {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A gene field does not fit its slot in the 64-bit word.
class EncodingRangeError : public Error {
public:
    using Error::Error;
};

/// A 64-bit word that does not decode to a valid gene.
class MalformedGeneError : public Error {
public:
    using Error::Error;
};

/// A genome violating a structural invariant (missing I/O nodes, dangling connections, ...).
class InvalidGenomeError : public Error {
public:
    using Error::Error;
};

/// A population file that cannot be parsed.
class FormatError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// The enabled-connection graph of a genome has a cycle.
class CyclicGenomeError : public Error {
public:
    using Error::Error;
};

/// The streaming engine and the reference reproduction disagreed.
class CompareMismatchError : public Error {
public:
    using Error::Error;
};

} // namespace genesys
