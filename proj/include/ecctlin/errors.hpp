// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ecctlin {

// Invalid argument values (degrees, shifts, indices, nonpositive rates).
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Incompatible tensor/vector/matrix dimensions.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A code construction that cannot be satisfied (divisibility, rank, ...).
struct ConstructionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line where parsing failed.
struct ParseError : std::runtime_error {
    int line;
    ParseError(const std::string& msg, int line_no)
        : std::runtime_error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required (diverged training).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ecctlin
