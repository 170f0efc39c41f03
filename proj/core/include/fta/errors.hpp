#pragma once

#include <stdexcept>
#include <string>

namespace fta {

// Error classes map 1:1 onto CLI exit codes: usage 1, data 2, invariant 3.

// Bad flag combinations, missing arguments.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Anything wrong with inputs: shape mismatches, corrupt streams, missing
// files, out-of-range configuration values.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Internal consistency violations; reaching one of these is a bug.
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw DataError(msg);
}

inline void check_invariant(bool cond, const std::string& msg) {
  if (!cond) throw InvariantError(msg);
}

}  // namespace fta
