#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace surfelnbp {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A point was handed to the projection with z <= 0.
class BehindCamera : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Surfel batch rejected on insert; carries the offending batch index.
class InvalidSurfel : public Error {
 public:
  InvalidSurfel(const std::string& what, std::size_t index)
      : Error(what + " (batch index " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class EmptyModel : public Error {
 public:
  using Error::Error;
};

class RefineDiverged : public Error {
 public:
  using Error::Error;
};

/// A mission phase failed; artifacts up to that point were flushed.
class MissionAborted : public Error {
 public:
  MissionAborted(const std::string& phase, const std::string& what)
      : Error("phase '" + phase + "' failed: " + what), phase_(phase) {}
  const std::string& phase() const { return phase_; }

 private:
  std::string phase_;
};

}  // namespace surfelnbp
