#pragma once

#include <stdexcept>
#include <string>

namespace codecl {

/// Caller passed an argument outside the operation's contract.
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Input data is unusable (non-finite values, empty sets, out-of-range labels).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A binary file does not match its declared format.
struct FormatError : DataError {
    FormatError(const std::string& what, std::size_t byte_offset)
        : DataError(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    std::size_t offset;
};

/// An object was used before reaching the required state.
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace codecl
