#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixsur {

// Base class for everything this library throws on purpose. Numerical
// failures are reported, never papered over with ridging or flooring, so
// callers (multi-start EM, model search, the bootstrap) can record the
// reason and move on.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A component covariance failed its Cholesky factorization.
class SingularCovariance : public Error {
 public:
  SingularCovariance(int component, const std::string& what)
      : Error(what), component_(component) {}
  int component() const { return component_; }

 private:
  int component_;
};

// The normal matrix of the generalized least squares step is numerically
// rank deficient.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

// A mixture component's effective sample size fell below what its
// covariance needs.
class EmptyComponent : public Error {
 public:
  EmptyComponent(int component, const std::string& what)
      : Error(what), component_(component) {}
  int component() const { return component_; }

 private:
  int component_;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class EnumerationTooLarge : public Error {
 public:
  EnumerationTooLarge(std::uint64_t cells, const std::string& what)
      : Error(what), cells_(cells) {}
  std::uint64_t cells() const { return cells_; }

 private:
  std::uint64_t cells_;
};

class TooFewReplicates : public Error {
 public:
  using Error::Error;
};

class DegenerateTable : public Error {
 public:
  using Error::Error;
};

// Ingestion errors carry enough context to point at the offending cell.
class MissingColumn : public Error {
 public:
  MissingColumn(std::string column, const std::string& what)
      : Error(what), column_(std::move(column)) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class EmptyData : public Error {
 public:
  using Error::Error;
};

// Every start of a multi-start fit failed; the reasons are kept in start
// order so the caller can see what went wrong where.
class AllStartsFailed : public Error {
 public:
  AllStartsFailed(std::vector<std::string> reasons, const std::string& what)
      : Error(what), reasons_(std::move(reasons)) {}
  const std::vector<std::string>& reasons() const { return reasons_; }

 private:
  std::vector<std::string> reasons_;
};

}  // namespace mixsur
