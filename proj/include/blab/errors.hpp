#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace blab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller supplied a value outside the operation's domain.
class InvalidInput : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class UnsupportedMode : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class SingularityError : public Error {
public:
    using Error::Error;
};

class IllPosedError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double best, double err)
        : Error(what), best_estimate(best), error_estimate(err) {}
    double best_estimate;
    double error_estimate;
};

class StatisticalPowerError : public Error {
public:
    using Error::Error;
};

class InconclusiveError : public Error {
public:
    InconclusiveError(const std::string& what, std::vector<std::string> items)
        : Error(what), undecidable(std::move(items)) {}
    std::vector<std::string> undecidable;
};

class ModelViolation : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class RichnessViolation : public Error {
public:
    using Error::Error;
};

class InternalInconsistency : public Error {
public:
    using Error::Error;
};

class TheoremViolation : public Error {
public:
    using Error::Error;
};

} // namespace blab
