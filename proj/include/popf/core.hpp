#pragma once

// Common scalar/vector aliases and error types shared across the library.

#include <cctype>
#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace popf {

namespace detail {
inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}
}  // namespace detail

using Complex = std::complex<double>;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using SparseComplexMatrix = Eigen::SparseMatrix<Complex>;
using Triplet = Eigen::Triplet<double>;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Case-file or CSV ingestion failure; message names the offending table/line.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Network power flow did not converge; carries the last residual norm.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, double residual_norm)
      : Error(msg), residual_norm(residual_norm) {}
  double residual_norm;
};

/// Problem assembly failure (inconsistent bounds, missing data).
class AssemblyError : public Error {
 public:
  using Error::Error;
};

/// Optimizer failure; carries the iteration count reached.
class SolveError : public Error {
 public:
  SolveError(const std::string& msg, int iterations)
      : Error(msg), iterations(iterations) {}
  int iterations;
};

}  // namespace popf
