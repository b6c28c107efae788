#pragma once

#include <stdexcept>
#include <string>

namespace svymix {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// malformed input text (CSV cell, config line); message carries the location
struct ParseError : Error {
    using Error::Error;
};

// structurally valid input that names the wrong things (missing column/key)
struct SchemaError : Error {
    using Error::Error;
};

// numerically valid input outside an operation's domain
struct DomainError : Error {
    using Error::Error;
};

struct EnumerationCapError : Error {
    using Error::Error;
};

// observed data has probability zero under every candidate strategy
struct ImpossibleSampleError : Error {
    using Error::Error;
};

// variance requested where it is undefined (n < 2 draws, nu < 2 units)
struct UndefinedVarianceError : Error {
    using Error::Error;
};

}  // namespace svymix
