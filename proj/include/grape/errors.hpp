#pragma once

#include <stdexcept>
#include <string>

namespace grape {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text: unified diffs, mini-language sources, config files.
class ParseError : public Error {
public:
    ParseError(const std::string& message, int line = 0, int column = 0)
        : Error(format(message, line, column))
        , m_line(line)
        , m_column(column)
    {
    }

    int line() const { return m_line; }
    int column() const { return m_column; }

private:
    static std::string format(const std::string& message, int line, int column)
    {
        if (line <= 0)
            return message;
        std::string where = std::to_string(line);
        if (column > 0)
            where += ":" + std::to_string(column);
        return where + ": " + message;
    }

    int m_line;
    int m_column;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// A document does not match its schema. The message names the field.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Dangling node references inside a graph or a correspondence.
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// Unknown key in a keyed collection (diff paths, parameter names).
class LookupError : public Error {
public:
    using Error::Error;
};

/// A sample whose graph is empty after simplification.
class DegenerateSampleError : public Error {
public:
    using Error::Error;
};

/// Non-finite value produced inside the network. The message names the op.
class NumericError : public Error {
public:
    using Error::Error;
};

/// CVSS score outside the four-level banding scheme.
class BandingError : public Error {
public:
    using Error::Error;
};

} // namespace grape
