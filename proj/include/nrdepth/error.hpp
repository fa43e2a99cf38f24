#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nrdepth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Face list refers to vertices that do not exist, or frames disagree on topology.
class TopologyError : public Error {
 public:
  using Error::Error;
};

/// A registration neighborhood is too degenerate to define a rotation.
class DegenerateGeometryError : public Error {
 public:
  DegenerateGeometryError(std::size_t vertex, const std::string& what)
      : Error(what), vertex_(vertex) {}
  std::size_t vertex() const noexcept { return vertex_; }

 private:
  std::size_t vertex_;
};

class CameraError : public Error {
 public:
  using Error::Error;
};

/// Malformed files, bad dimensions, missing inputs. The CLI maps this to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient. The CLI maps this to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace nrdepth
