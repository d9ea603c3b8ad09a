#pragma once
#include <stdexcept>
#include <string>

namespace switchsel {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct EmptySample : Error {
    EmptySample() : Error("empty sample") {}
};

// Sufficient-statistic mean on or outside the boundary of the mean space.
struct UndefinedMLE : Error {
    explicit UndefinedMLE(const std::string& what = "MLE undefined: sufficient mean not strictly inside the mean space")
        : Error(what) {}
};

struct NonFiniteLoss : Error {
    explicit NonFiniteLoss(const std::string& what = "loss diverges for these parameters") : Error(what) {}
};

struct InvalidObservation : Error {
    explicit InvalidObservation(const std::string& what = "observation outside family support") : Error(what) {}
};

struct NumericUnderflow : Error {
    explicit NumericUnderflow(const std::string& what = "predictive density underflowed to zero") : Error(what) {}
};

struct GridTooCoarse : Error {
    explicit GridTooCoarse(const std::string& what = "quadrature failed to converge within the node cap") : Error(what) {}
};

struct MismatchedN : Error {
    MismatchedN() : Error("marginal states disagree on sample size") {}
};

struct NTooSmall : Error {
    explicit NTooSmall(const std::string& what = "criterion requires n >= 3") : Error(what) {}
};

// Raised when a criterion without an anytime Type-I guarantee is wired into a
// sequential test.
struct NotAnytimeValid : Error {
    explicit NotAnytimeValid(const std::string& what = "criterion does not define a robust null hypothesis test")
        : Error(what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("config: " + what) {}
};

}  // namespace switchsel
