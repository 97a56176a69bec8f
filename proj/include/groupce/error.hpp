#pragma once

#include <stdexcept>
#include <string>

namespace groupce {

// Error taxonomy mirrored by the C API status codes.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient during training; message names the culprit.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Metric undefined on the given records (e.g. single-class AUC input).
struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DiagnosticError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace groupce
