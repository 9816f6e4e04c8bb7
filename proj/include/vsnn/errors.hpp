#pragma once

#include <stdexcept>
#include <string>

namespace vsnn {

// Base class for all library errors. CLI maps these to exit code 1
// (except NoExcitablePointFound -> 2).
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// laser-neuron
struct NonFiniteState : Error {
    explicit NonFiniteState(const std::string& msg) : Error("NonFiniteState: " + msg) {}
};
struct EmptyDrive : Error {
    explicit EmptyDrive(const std::string& msg) : Error("EmptyDrive: " + msg) {}
};
struct NoConvergence : Error {
    explicit NoConvergence(const std::string& msg) : Error("NoConvergence: " + msg) {}
};
struct NoExcitablePointFound : Error {
    explicit NoExcitablePointFound(const std::string& msg)
        : Error("NoExcitablePointFound: " + msg) {}
};

// input-pipeline
struct InvalidDimension : Error {
    explicit InvalidDimension(const std::string& msg) : Error("InvalidDimension: " + msg) {}
};
struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& msg) : Error("DimensionMismatch: " + msg) {}
};
struct EmptyInput : Error {
    explicit EmptyInput(const std::string& msg) : Error("EmptyInput: " + msg) {}
};

// spike-detector
struct LayoutMismatch : Error {
    explicit LayoutMismatch(const std::string& msg) : Error("LayoutMismatch: " + msg) {}
};
struct EmptyTrace : Error {
    explicit EmptyTrace(const std::string& msg) : Error("EmptyTrace: " + msg) {}
};

// readout
struct EmptyTrainingSet : Error {
    explicit EmptyTrainingSet(const std::string& msg) : Error("EmptyTrainingSet: " + msg) {}
};

// bench-harness
struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error("ParseError: " + msg) {}
};
struct ClassCountError : Error {
    explicit ClassCountError(const std::string& msg) : Error("ClassCountError: " + msg) {}
};
struct InvalidSize : Error {
    explicit InvalidSize(const std::string& msg) : Error("InvalidSize: " + msg) {}
};
struct CalibrationMissing : Error {
    explicit CalibrationMissing(const std::string& msg) : Error("CalibrationMissing: " + msg) {}
};

// configuration / IO
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("ConfigError: " + msg) {}
};
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("IoError: " + msg) {}
};

}  // namespace vsnn
