#pragma once

#include <stdexcept>
#include <string>

namespace tabrep {

// Base class for everything this library throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Matrix / layer dimension mismatches. Message names both shapes.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid argument values (negative widths, sigma <= 0, lr <= 0, ...).
struct ParamError : Error {
    using Error::Error;
};

// Cell-level CSV parse failures; message carries row/column address.
struct ParseError : Error {
    using Error::Error;
};

// Schema violations: duplicate columns, header mismatch, missing target.
struct SchemaError : Error {
    using Error::Error;
};

// Model container / manifest format violations (bad magic, version, truncation).
struct FormatError : Error {
    using Error::Error;
};

// Dataset content problems (fully-missing column, missing target values, ...).
struct DataError : Error {
    using Error::Error;
};

// Training produced a non-finite loss; message names epoch (and phase where relevant).
struct DivergenceError : Error {
    using Error::Error;
};

// Filesystem failures.
struct IoError : Error {
    using Error::Error;
};

// Raised by the audit mode when a fitted statistic depends on held-out rows.
struct LeakageError : Error {
    using Error::Error;
};

} // namespace tabrep
