#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ifsd {

/// Base of every error raised by the library. Callers that only need
/// "something went wrong" catch this; the subclasses name the contract
/// that was broken.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define IFSD_DEFINE_ERROR(Name)                \
    class Name : public Error {                \
    public:                                    \
        using Error::Error;                    \
    }

IFSD_DEFINE_ERROR(SeriesTooShort);
IFSD_DEFINE_ERROR(DuplicateId);
IFSD_DEFINE_ERROR(IoError);
IFSD_DEFINE_ERROR(SchemaMismatch);
IFSD_DEFINE_ERROR(NeverOffloaded);
IFSD_DEFINE_ERROR(EmptyWindow);
IFSD_DEFINE_ERROR(EmptyInput);
IFSD_DEFINE_ERROR(ConstraintViolation);
IFSD_DEFINE_ERROR(InsufficientData);
IFSD_DEFINE_ERROR(ConfigError);
IFSD_DEFINE_ERROR(UnknownPreset);
IFSD_DEFINE_ERROR(DegenerateLabels);
IFSD_DEFINE_ERROR(ShapeError);
IFSD_DEFINE_ERROR(InvalidFlow);

#undef IFSD_DEFINE_ERROR

/// Malformed input line. `line()` is 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& reason)
        : Error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

}  // namespace ifsd
