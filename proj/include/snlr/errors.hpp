#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace snlr {

// Argument outside the domain of a function (non-finite input, p outside
// (0,1), stress outside the working domain, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Inversion target outside the range a curve attains on its working domain.
class RangeError : public std::range_error {
 public:
  RangeError(const std::string& what, double lo, double hi)
      : std::range_error(what), lo_(lo), hi_(hi) {}

  double attainable_lo() const noexcept { return lo_; }
  double attainable_hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

class DegenerateDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class SingularInformationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Optimization failed; carries one diagnostic line per attempt (start,
// bracket step, ...).
class OptimizationError : public std::runtime_error {
 public:
  OptimizationError(const std::string& what, std::vector<std::string> trace = {})
      : std::runtime_error(what), trace_(std::move(trace)) {}

  const std::vector<std::string>& trace() const noexcept { return trace_; }

 private:
  std::vector<std::string> trace_;
};

// Malformed input file. row is 1-based (data rows, header excluded), 0 when
// the problem is not tied to a row.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row = 0)
      : std::runtime_error(what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace snlr
