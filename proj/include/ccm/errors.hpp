#pragma once

#include <stdexcept>
#include <string>

namespace ccm {

/// Bad input: a parameter outside its domain. The message names the field.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A requested design has no feasible parameter.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The comparator never fired within the allowed span of a cycle.
class StarvationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A quantity that only exists for stable poles was requested for an unstable one.
class UnstableError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A certificate was requested outside the modulation scheme it is proven for.
class ScopeError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The spectrum of a waveform cannot be integrated the requested way.
class SpectrumError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

namespace detail {

inline void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

}  // namespace detail

}  // namespace ccm
