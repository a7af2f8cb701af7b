#pragma once

#include <stdexcept>
#include <string>

namespace cashbo {

// Invalid configuration, file format, or argument. CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Linear algebra breakdown (e.g. Cholesky failure after max jitter),
// non-finite values. CLI exit code 2.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// External evaluator protocol failure: timeout, malformed response,
// dead child process. CLI exit code 3.
class EvaluatorError : public std::runtime_error {
public:
  explicit EvaluatorError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cashbo
