#pragma once

#include <stdexcept>
#include <string>

namespace compinv {

/// Bad input: shapes, ranges, schema violations. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure: rank deficiency, divergence, sampler starvation. Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankDeficiencyError : public NumericalError {
 public:
  RankDeficiencyError(const std::string& what, long rank, long dimension)
      : NumericalError(what + ": rank " + std::to_string(rank) + " < required " +
                       std::to_string(dimension)),
        rank_(rank),
        dimension_(dimension) {}

  long rank() const noexcept { return rank_; }
  long dimension() const noexcept { return dimension_; }

 private:
  long rank_;
  long dimension_;
};

}  // namespace compinv
