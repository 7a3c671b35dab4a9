#pragma once

#include <stdexcept>
#include <string>

namespace hgo {

// invalid arguments / malformed configuration (CLI exit code 2)
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// evaluator returned a non-finite value
struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// a synthesis stage could not certify its inequality
struct SynthesisError : std::runtime_error {
    SynthesisError(const std::string& stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage(stage) {}
    std::string stage;
};

// trajectory left the representable range
struct DivergenceError : std::runtime_error {
    DivergenceError(double last_t, const std::string& what)
        : std::runtime_error(what), last_valid_t(last_t) {}
    double last_valid_t;
};

} // namespace hgo
