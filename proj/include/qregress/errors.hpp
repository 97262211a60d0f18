#pragma once

#include <stdexcept>
#include <string>

namespace qregress {

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DecayError : std::runtime_error {
    explicit DecayError(const std::string& msg) : std::runtime_error(msg) {}
};

struct GridMismatch : std::runtime_error {
    explicit GridMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct UnsupportedSpec : std::runtime_error {
    explicit UnsupportedSpec(const std::string& msg) : std::runtime_error(msg) {}
};

struct UnsupportedCorrelator : std::runtime_error {
    explicit UnsupportedCorrelator(const std::string& msg) : std::runtime_error(msg) {}
};

struct UnsupportedContinuation : std::runtime_error {
    explicit UnsupportedContinuation(const std::string& msg) : std::runtime_error(msg) {}
};

struct WindowError : std::runtime_error {
    explicit WindowError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SizeError : std::runtime_error {
    explicit SizeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StepSizeError : std::runtime_error {
    explicit StepSizeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct RecurrenceError : std::runtime_error {
    explicit RecurrenceError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace qregress
