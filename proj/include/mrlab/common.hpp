#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mrlab {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Spatial point. One-dimensional problems use the first coordinate only.
using Point = Eigen::Vector2d;
/// Coefficient tensor. One-dimensional problems use the (0,0) entry only.
using Tensor = Eigen::Matrix2d;

/// A time-indexed sequence of node vectors.
using Trajectory = std::vector<VectorXd>;

inline constexpr double kPi = 3.14159265358979323846;

// Error hierarchy. Every failure raised by the library derives from Error so
// callers (the CLI in particular) can map it to a single exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class SingularPointError : public Error {
 public:
  using Error::Error;
};

class AssemblyError : public Error {
 public:
  using Error::Error;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

class NotSectorialError : public Error {
 public:
  using Error::Error;
};

class BranchError : public Error {
 public:
  using Error::Error;
};

class OverflowError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class UndefinedError : public Error {
 public:
  using Error::Error;
};

class ContractionError : public Error {
 public:
  using Error::Error;
};

/// Raised by shift_search; carries the (mu, ||Q||) table that was computed.
class ExhaustedError : public Error {
 public:
  ExhaustedError(const std::string& what,
                 std::vector<std::pair<double, double>> table)
      : Error(what), table_(std::move(table)) {}
  const std::vector<std::pair<double, double>>& table() const { return table_; }

 private:
  std::vector<std::pair<double, double>> table_;
};

/// Small deterministic generator (splitmix64). Distributions are hand-rolled
/// so that streams are identical across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

  double normal();

  bool sign() { return (next() >> 63) != 0; }

  /// Derived stream for sub-task k; used to keep parallel work reproducible.
  Rng split(std::uint64_t k) const { return Rng(state_ ^ (0xD1B54A32D192ED03ULL * (k + 1))); }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  while (u <= 0.0) u = uniform();
  const double v = uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  spare_ = r * std::sin(2.0 * kPi * v);
  has_spare_ = true;
  return r * std::cos(2.0 * kPi * v);
}

/// Ordinary least squares fit y = intercept + slope * x.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LinearFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mrlab
