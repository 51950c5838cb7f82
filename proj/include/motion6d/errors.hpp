#pragma once

#include <stdexcept>
#include <string>

namespace motion6d {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rotation at (or numerically indistinguishable from) 180 degrees.
class DegenerateRotation : public Error {
 public:
  using Error::Error;
};

class BehindCamera : public Error {
 public:
  using Error::Error;
};

class EmptyMask : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace motion6d
