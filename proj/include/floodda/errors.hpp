#pragma once

#include <stdexcept>
#include <string>

namespace floodda {

// Error categories map one-to-one onto CLI exit codes (see tools/floodda.cpp).

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AlignmentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Query outside a sampled time series.
class ExtrapolationError : public AlignmentError {
public:
    using AlignmentError::AlignmentError;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace floodda
