#pragma once

#include <stdexcept>
#include <string>

namespace dp {

// Library error categories. The C API maps these onto dp_status codes.
enum class ErrorKind {
    Dimension,  // shape/size incompatibility
    Parameter,  // invalid argument value or configuration
    Format,     // malformed file contents (magic, header, truncation)
    Io,         // filesystem failure
    Data,       // dataset-level problem (missing pairs, bad rows)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_dimension(const std::string& msg) { throw Error(ErrorKind::Dimension, msg); }
[[noreturn]] inline void throw_parameter(const std::string& msg) { throw Error(ErrorKind::Parameter, msg); }
[[noreturn]] inline void throw_format(const std::string& msg) { throw Error(ErrorKind::Format, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw Error(ErrorKind::Io, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(ErrorKind::Data, msg); }

}  // namespace dp
