#pragma once

#include <stdexcept>
#include <string>

namespace ledro {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A spec value was non-finite or otherwise unusable.
class InvalidSpecError : public Error {
public:
    using Error::Error;
};

/// Normalization denominator s + s_bound collapsed to zero.
class DegenerateNormalizerError : public Error {
public:
    using Error::Error;
};

/// A region did not line up with the parameter definitions.
class RegionSchemaError : public Error {
public:
    using Error::Error;
};

/// A point fell outside the region it was scaled against.
class OutOfRegionError : public Error {
public:
    using Error::Error;
};

/// Netlist template and parameter set disagree.
class TemplateError : public Error {
public:
    using Error::Error;
};

/// Simulator output could not be parsed.
class MeasureParseError : public Error {
public:
    using Error::Error;
};

/// A named measure was absent from simulator output.
class NamedMeasureMissingError : public MeasureParseError {
public:
    explicit NamedMeasureMissingError(const std::string& measure)
        : MeasureParseError("named measure missing: " + measure), measure_(measure) {}
    const std::string& measure() const { return measure_; }

private:
    std::string measure_;
};

/// Bad configuration (file, flags, or fixture exhaustion).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Calibration found no design whose gain cleared the threshold.
class GoodPointsNotFoundError : public Error {
public:
    using Error::Error;
};

/// No parameter range could be extracted from an LLM response.
class RegionParseFailure : public Error {
public:
    using Error::Error;
};

/// Live LLM backend failed after all retries.
class LlmTransportError : public Error {
public:
    using Error::Error;
};

/// Two run reports cannot be compared.
class ComparisonError : public Error {
public:
    using Error::Error;
};

/// A run directory is already owned by another orchestrator.
class RunLockError : public Error {
public:
    using Error::Error;
};

} // namespace ledro
