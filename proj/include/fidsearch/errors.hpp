#pragma once

#include <stdexcept>
#include <string>

namespace fidsearch {

// Bad input: malformed files, violated preconditions, bad flags.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// The filesystem refused a read or write.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical routine could not produce a result (e.g. eigensolver did not converge).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] void throw_validation(const std::string& what);
[[noreturn]] void throw_io(const std::string& what);

}  // namespace fidsearch
