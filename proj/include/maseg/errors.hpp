#pragma once

#include <stdexcept>
#include <string>

namespace maseg {

/// Bad inputs, bad configuration, violated preconditions. CLI exit code 2.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Missing, unreadable or malformed files. CLI exit code 3.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace maseg
