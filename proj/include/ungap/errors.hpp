#pragma once

#include <stdexcept>
#include <string>

namespace ungap {

// Bad data handed to an operation (shape mismatch, non-binary mask, ...).
struct InvalidInputError : std::runtime_error {
    explicit InvalidInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration value (beta out of range, negative weight, ...).
struct InvalidConfigError : std::runtime_error {
    explicit InvalidConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a loss term goes non-finite during training.
struct TrainingDivergedError : std::runtime_error {
    explicit TrainingDivergedError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ungap
