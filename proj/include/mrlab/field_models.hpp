#pragma once

// Coefficient families for divergence-form operators
//   L u = -div(A grad u + a u) + b . grad u + c0 u
// together with the oscillation and time-regularity measurements used to
// check the hypotheses of the non-autonomous theory.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mrlab/common.hpp"

namespace mrlab {

enum class DomainKind { interval, square, disk };

std::string to_string(DomainKind kind);
DomainKind domain_from_string(const std::string& name);

/// Membership in the closed reference domain: (0,1), (0,1)^2 or the unit disk.
bool in_domain(DomainKind kind, const Point& x, double tol = 1e-12);

struct HolderPair {
  double constant = 0.0;
  double exponent = 1.0;
};

struct CoefficientField {
  std::string name;
  int dim = 1;
  DomainKind domain = DomainKind::interval;

  std::function<Tensor(double t, const Point& x)> leading;
  // Empty callables mean "identically zero".
  std::function<Point(double t, const Point& x)> drift_a;
  std::function<Point(double t, const Point& x)> drift_b;
  std::function<double(double t, const Point& x)> zero_order;
  std::function<double(double t, const Point& x)> robin_beta;

  double alpha0 = 1.0;
  double sup_bound = 1.0;
  std::optional<HolderPair> time_holder;

  /// Points where the coefficient formula is undefined (the Meyers origin).
  std::function<bool(const Point& x)> singular_at;

  bool has_robin() const { return static_cast<bool>(robin_beta); }
  bool has_lower_order() const {
    return static_cast<bool>(drift_a) || static_cast<bool>(drift_b) || static_cast<bool>(zero_order);
  }
};

/// Evaluates the leading coefficient matrix as a dim x dim matrix.
MatrixXd eval_matrix(const CoefficientField& field, double t, const Point& x);

/// Smallest eigenvalue of the symmetric part of a dim x dim block of `a`.
double min_symmetric_eigenvalue(const Tensor& a, int dim);

// --- built-in families ----------------------------------------------------

CoefficientField identity_field(int dim, DomainKind domain);

CoefficientField constant_field(int dim, DomainKind domain, const Tensor& a, double zero_order = 0.0);

struct HolderBlendParams {
  double beta_time = 0.75;
  double amplitude = 0.5;
  double t0 = 0.0;
  double horizon = 1.0;
};

/// A(t,x) = A0(x) + amplitude * |t - t0|^beta_time * B(x) with smooth positive
/// A0 and B; elliptic with alpha0 = 0.75 for every t >= 0.
CoefficientField holder_blend(int dim, DomainKind domain, const HolderBlendParams& params);

/// Blend with caller-supplied spatial profiles; `alpha0` must bound A0 from below
/// and B must be positive semidefinite.
CoefficientField holder_blend(int dim, DomainKind domain, std::function<Tensor(const Point&)> base,
                              std::function<Tensor(const Point&)> perturbation, double alpha0,
                              double sup_base, double sup_perturbation, const HolderBlendParams& params);

/// The Meyers coefficients on the punctured unit disk:
///   A(x,y) = 1/(4(x^2+y^2)) [[4x^2+y^2, 4xy], [4xy, x^2+4y^2]].
CoefficientField meyers_field();

struct CheckerboardParams {
  double cell = 1.0 / 8.0;
  double low = 0.25;
  double high = 1.0;
  double mollify_width = 0.0;  // 0 gives the sharp (BMO only) pattern
  double beta_time = 0.75;
  double amplitude = 0.0;      // 0 makes the field constant in time
  double t0 = 0.0;
  double horizon = 1.0;
};

/// Isotropic checkerboard a(x) I on the unit square with optionally mollified
/// cell boundaries and an optional Hölder-in-time isotropic perturbation.
CoefficientField checkerboard_field(const CheckerboardParams& params);

struct RobinParams {
  double alpha_time = 0.9;  // Hölder exponent of t -> beta(t, x)
  double beta0 = 1.0;
  double amplitude = 1.0;
  double t0 = 0.0;
  double lipschitz_slope = 0.5;  // beta is (1 + slope * x0) times the time profile
  double horizon = 1.0;
};

/// Laplacian plus identity with non-autonomous Robin coefficient
///   beta(t,x) = beta0 + amplitude |t - t0|^alpha_time (1 + slope x0).
CoefficientField robin_field(int dim, DomainKind domain, const RobinParams& params);

struct DriftParams {
  Point a{0.0, 0.0};
  Point b{1.0, 0.0};
  double zero_order = 0.0;
  double beta_time = 0.75;
  double amplitude = 0.0;
  double t0 = 0.0;
  double horizon = 1.0;
};

/// Identity (optionally time-blended) leading part with constant drift terms;
/// produces non-symmetric operators.
CoefficientField drift_field(int dim, DomainKind domain, const DriftParams& params);

// --- measurements ---------------------------------------------------------

struct VmoProfile {
  std::vector<double> radii;
  std::vector<double> eta;
  std::string field_id;
};

struct VmoOptions {
  int sample_density = 256;   // grid points per unit length
  double stride_fraction = 0.25;
  /// Region that every sampled ball must lie in; defaults to the field's
  /// domain minus its singular points.
  std::function<bool(const Point&)> region;
};

/// Discrete vmo-modulus: mean oscillation of every leading coefficient over
/// axis-aligned squares inscribed in balls of radius rho, maximized over
/// positions and components, then over rho <= r.
VmoProfile vmo_modulus(const CoefficientField& field, double t, const std::vector<double>& radii,
                       const VmoOptions& options = {});

struct HolderFitResult {
  bool constant_in_time = false;
  double constant = 0.0;
  double exponent = 0.0;
  double r2 = 0.0;
  int separations = 0;
};

/// Fits d(t,s) <= C |t-s|^beta where d is the largest coefficient change between
/// two times over a spatial sample. Per separation the largest defect is kept
/// (the modulus of continuity) and log d is regressed on log |t-s|.
HolderFitResult time_holder_fit(const CoefficientField& field, const std::vector<double>& time_samples,
                                int spatial_samples_per_axis = 9);

}  // namespace mrlab
