#pragma once

#include <stdexcept>
#include <string>

namespace citygen {

// Input outside the mathematical domain of an operation (e.g. latitude past
// the Web-Mercator limit).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed or inconsistent user input: bad geometry, wrong dimensions,
// violated preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inputs are well-formed but degenerate for the requested metric
// (zero variance, coincident camera centers).
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Optimistic-concurrency failure: the caller's revision is stale.
class ConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace citygen
