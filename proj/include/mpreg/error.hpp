#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mpreg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class CoarseningError : public Error {
 public:
  using Error::Error;
};

/// Krylov breakdown without convergence, or an unbuilt/stale solver state.
class SolverError : public Error {
 public:
  using Error::Error;
};

class RankDeficiency : public Error {
 public:
  RankDeficiency(const std::string& what, std::ptrdiff_t pivot_index)
      : Error(what), pivot_index_(pivot_index) {}
  std::ptrdiff_t pivot_index() const noexcept { return pivot_index_; }

 private:
  std::ptrdiff_t pivot_index_;
};

class LineSearchFailure : public Error {
 public:
  LineSearchFailure(const std::string& what, double merit_start, double merit_last, double tau_last)
      : Error(what), merit_start_(merit_start), merit_last_(merit_last), tau_last_(tau_last) {}
  double merit_start() const noexcept { return merit_start_; }
  double merit_last() const noexcept { return merit_last_; }
  double tau_last() const noexcept { return tau_last_; }

 private:
  double merit_start_;
  double merit_last_;
  double tau_last_;
};

}  // namespace mpreg
