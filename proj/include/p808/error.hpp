#pragma once

#include <stdexcept>
#include <string>

namespace p808 {

// Bad experiment configuration (malformed pattern, missing pools, scale mismatch).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value violates a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input bytes could not be interpreted (CSV, JSON, WAV).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A statistic is undefined for the given input (zero variance, rank deficiency).
class StatsError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace p808
