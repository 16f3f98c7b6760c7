#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace divavg {

enum class ErrorKind {
  Usage,             // caller broke a precondition (window too large, index out of range)
  Validation,        // invalid configuration or family parameters
  HorizonExhausted,  // cutoff search ran past its horizon
  NonPsd,            // correlation window is not positive semidefinite
  Numerical,         // numerical fault in an otherwise valid computation
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

/// Raised when a factorization meets a pivot below -tol even at the jitter cap.
class NonPsdError : public Error {
 public:
  NonPsdError(std::int64_t leading_minor, double pivot, const std::string& what)
      : Error(ErrorKind::NonPsd, what), leading_minor_(leading_minor), pivot_(pivot) {}
  /// 1-based order of the offending leading principal minor.
  std::int64_t leading_minor() const noexcept { return leading_minor_; }
  double pivot() const noexcept { return pivot_; }

 private:
  std::int64_t leading_minor_;
  double pivot_;
};

/// The cutoff search could not satisfy the averaging bound within its horizon.
class HorizonExhaustedError : public Error {
 public:
  HorizonExhaustedError(int level, std::int64_t horizon, double best_average,
                        std::vector<std::int64_t> partial_cutoffs, const std::string& what)
      : Error(ErrorKind::HorizonExhausted, what),
        level_(level),
        horizon_(horizon),
        best_average_(best_average),
        partial_cutoffs_(std::move(partial_cutoffs)) {}

  /// Ladder level whose cutoff could not be found (1-based).
  int level() const noexcept { return level_; }
  std::int64_t horizon() const noexcept { return horizon_; }
  /// Smallest running average seen during the failed scan.
  double best_average() const noexcept { return best_average_; }
  const std::vector<std::int64_t>& partial_cutoffs() const noexcept { return partial_cutoffs_; }

 private:
  int level_;
  std::int64_t horizon_;
  double best_average_;
  std::vector<std::int64_t> partial_cutoffs_;
};

}  // namespace divavg
