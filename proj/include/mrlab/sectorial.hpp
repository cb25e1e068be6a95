#pragma once

// Dense-matrix functional calculus for sectorial operators on weighted l^p:
// spectra, resolvents, sector verification, the semigroup e^{-sA}, complex
// powers A^theta, weighted adjoints, fractional scale norms and discrete
// real-interpolation norms.

#include <optional>
#include <string>
#include <vector>

#include "mrlab/common.hpp"
#include "mrlab/discretizer.hpp"

namespace mrlab {

/// Weighted l^p_w with pairing <u, v> = sum_i w_i u_i v_i.
struct WeightedSpace {
  VectorXd weights;
  double p = 2.0;

  Eigen::Index size() const { return weights.size(); }
  double conjugate_exponent() const;
  WeightedSpace dual() const { return {weights, conjugate_exponent()}; }

  static WeightedSpace uniform(Eigen::Index n, double p = 2.0) { return {VectorXd::Ones(n), p}; }
};

/// Certified bracket for an induced operator norm. For p in {1, 2, inf} the two
/// ends coincide.
struct NormBounds {
  double lower = 0.0;
  double upper = 0.0;
  bool exact() const { return lower == upper; }
};

struct PowerIterationOptions {
  /// Random restarts; a negative value skips the iteration and reports the
  /// largest column norm as the lower bound.
  int restarts = 20;
  int max_iterations = 60;
  std::uint64_t seed = 0x5EC7u;
};

/// Induced norm of M on l^p_w. Exact for p in {1, 2, inf}; otherwise a Boyd
/// power-iteration lower bound and a Riesz-Thorin upper bound.
template <typename Scalar>
NormBounds induced_norm(const Matrix<Scalar>& M, const WeightedSpace& space, const PowerIterationOptions& opts = {});

/// Boyd power iteration; also returns the maximizing unit vector.
template <typename Scalar>
std::pair<double, Vector<Scalar>> boyd_power_iteration(const Matrix<Scalar>& B, double p,
                                                       const PowerIterationOptions& opts = {});

std::vector<Complex> spectrum(const MatrixXd& A);

/// Shorthand for max |eigenvalue|.
double spectral_radius(const MatrixXd& A);

/// (lambda I - A)^{-1}. Throws SingularityError when lambda is within
/// 1e-10 ||A|| of the spectrum (checked against `eigenvalues` when supplied).
MatrixXcd resolvent(const MatrixXd& A, Complex lambda, const std::vector<Complex>* eigenvalues = nullptr);

struct LambdaGrid {
  /// Angles of the sampled rays (sampled at +angle and -angle). Empty means
  /// phi + angle_offset.
  std::vector<double> ray_angles;
  double angle_offset = 1e-3;
  bool include_negative_axis = true;
  double min_factor = 1e-3;  // radii from min_factor * |smallest eigenvalue|
  double max_factor = 1e3;   //         to max_factor * |largest eigenvalue|
  int per_decade = 6;
};

/// The sampled lambda values for a spectrum with the given extreme moduli.
std::vector<Complex> lambda_samples(const LambdaGrid& grid, double phi, double min_modulus, double max_modulus);

struct SectorReport {
  double phi = 0.0;
  NormBounds constant;           // sup ||lambda R(lambda, A)||
  NormBounds constant_one_plus;  // sup ||(1 + |lambda|) R(lambda, A)||
  double spectrum_margin = 0.0;
  int samples = 0;
  Complex witness{0.0, 0.0};
};

/// Distance from z to the complement of the open sector |arg| < phi.
double distance_to_sector_complement(Complex z, double phi);

SectorReport sector_verify(const MatrixXd& A, const WeightedSpace& space, double phi, const LambdaGrid& grid = {});

/// Uniform version over every node matrix of a family.
SectorReport sector_verify(const OperatorFamily& family, double phi, const LambdaGrid& grid = {});

/// Budget on s * ||A||_1 beyond which mat_exp refuses (scaling would overflow).
inline constexpr double kExpBudget = 1e12;

/// e^{-sA} by scaling and squaring with a Padé degree chosen from ||sA||_1.
template <typename Scalar>
Matrix<Scalar> mat_exp(const Matrix<Scalar>& A, double s);

struct FracPowerResult {
  MatrixXcd value;
  std::optional<std::string> warning;
};

/// A^theta on the principal branch (complex Schur, blocked Schur-Parlett).
FracPowerResult frac_power(const MatrixXd& A, Complex theta);

/// Real part of A^theta for real theta.
MatrixXd real_power(const MatrixXd& A, double theta);

/// Weighted adjoint W^{-1} A^T W: <Au, v> = <u, A' v>.
template <typename Scalar>
Matrix<Scalar> adjoint(const Matrix<Scalar>& A, const WeightedSpace& space) {
  if (A.rows() != space.size() || A.cols() != space.size()) throw DomainError("adjoint: size mismatch");
  Matrix<Scalar> out(A.cols(), A.rows());
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = A(j, i) * (space.weights(j) / space.weights(i));
  return out;
}

template <typename Scalar>
Scalar pairing(const WeightedSpace& space, const Vector<Scalar>& u, const Vector<Scalar>& v) {
  return (space.weights.cast<Scalar>().array() * u.array() * v.array()).sum();
}

/// ||A^alpha x||_{l^p_w} for alpha in [-1, 1].
double scale_norm(const MatrixXd& A, const WeightedSpace& space, double alpha, const VectorXd& x);

/// Precomputed quasi-minimizers z_s = s (s + A)^{-1} x over a dyadic s-grid
/// together with the limits s = 0 (z = 0) and s = inf (z = x).
class KFunctional {
 public:
  KFunctional(const MatrixXd& A, const WeightedSpace& space, const VectorXd& x, int min_level = -60,
              int max_level = 60);
  /// min_s ||x - z_s|| + t ||A z_s||.
  double operator()(double t) const;

 private:
  std::vector<double> residual_;  // ||x - z_s||
  std::vector<double> graph_;     // ||A z_s||
};

double quasi_k_functional(const MatrixXd& A, const WeightedSpace& space, const VectorXd& x, double t,
                          int min_level = -60, int max_level = 60);

enum class CoupleOrder {
  space_first,   // (X, D(A))_{theta,q}
  domain_first,  // (D(A), X)_{theta,q} = (X, D(A))_{1-theta,q}
};

/// (sum_j (2^{-j theta} K(2^j, x))^q)^{1/q} over j in [j_min, j_max].
double real_interp_norm(const MatrixXd& A, const WeightedSpace& space, double theta, double q, const VectorXd& x,
                        CoupleOrder order = CoupleOrder::space_first, int j_min = -20, int j_max = 20);

/// sup over lambda on the ray arg = angle of |lambda|^{1-alpha} ||A^alpha R(lambda, A)||.
double interpolated_resolvent_bound(const MatrixXd& A, const WeightedSpace& space, double alpha, double angle,
                                    double min_radius, double max_radius, int samples);

struct BipFit {
  double M = 0.0;
  double omega = 0.0;
  double max_unitarity_defect = 0.0;  // max | ||A^{is}|| - 1 |
  std::vector<double> s_values;
  std::vector<double> norms;
};

/// Norms of the imaginary powers A^{is} and a fitted envelope M e^{omega |s|}
/// that dominates every sample.
BipFit bip_fit(const MatrixXd& A, const WeightedSpace& space, const std::vector<double>& s_values);

}  // namespace mrlab
