#pragma once

#include <stdexcept>
#include <string>

namespace qsvm {

// Base of every error raised by the library. Callers that only care about
// "something in the pipeline failed" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateLimbError : public Error {
 public:
  DegenerateLimbError(int center, int neighbor, const std::string& what)
      : Error(what), center_(center), neighbor_(neighbor) {}
  int center() const noexcept { return center_; }
  int neighbor() const noexcept { return neighbor_; }

 private:
  int center_;
  int neighbor_;
};

class WindowTooShortError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

class SingleClassError : public Error {
 public:
  using Error::Error;
};

class EmptyDataError : public Error {
 public:
  using Error::Error;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, long iterations, double gap)
      : Error(what), iterations_(iterations), gap_(gap) {}
  long iterations() const noexcept { return iterations_; }
  double gap() const noexcept { return gap_; }

 private:
  long iterations_;
  double gap_;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& msg)
      : Error(source + ":" + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

}  // namespace qsvm
