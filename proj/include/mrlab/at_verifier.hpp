#pragma once

// Acquistapace-Terreni operator norms, fits of the constants in
//   ||A(t) R(lambda, A(t)) (A(t)^{-1} - A(s)^{-1})|| <= K |t-s|^beta / (1 + |lambda|^{1-gamma}),
// the fractional-power form of the Hölder hypothesis and the search for a
// shift that makes Q a contraction.

#include <utility>
#include <vector>

#include "mrlab/common.hpp"
#include "mrlab/discretizer.hpp"
#include "mrlab/nacp_solver.hpp"
#include "mrlab/sectorial.hpp"

namespace mrlab {

/// ||A(t) R(lambda, A(t)) (A(t)^{-1} - A(s)^{-1})|| on the family's space; zero
/// when t == s.
NormBounds at_operator_norm(const OperatorFamily& family, double t, double s, Complex lambda);

struct AtFitOptions {
  /// Rays arg(lambda) = +-angle sampled for every pair.
  std::vector<double> ray_angles{3.0 * kPi / 4.0, kPi};
  /// Large-|lambda| regime used for gamma: [10 rho, 10^decades * 10 rho].
  int decades = 6;
  int per_decade = 4;
  /// Small-|lambda| samples (down to small_factor * smallest |eigenvalue|) are
  /// added for the intercept stage.
  double small_factor = 1e-2;
  std::vector<std::pair<double, double>> pairs;
};

struct ATFit {
  bool autonomous = false;
  double K_fit = 0.0;
  double beta_fit = 0.0;
  double gamma_fit = 0.0;
  double r2_time = 0.0;
  double r2_lambda = 0.0;
  bool admissible = false;
  // Sample specification.
  std::vector<double> ray_angles;
  std::vector<double> radii;
  std::vector<std::pair<double, double>> pairs;
};

/// `count` pairs (t0, t0 + d) with log-spaced separations d in [min_sep, max_sep].
std::vector<std::pair<double, double>> anchored_pairs(double t0, double min_sep, double max_sep, int count);

ATFit at_fit(const OperatorFamily& family, const AtFitOptions& options);

/// ||A(t)^{-gamma} (A(t) - A(s)) A(s)^{-1}|| on the family's space.
NormBounds holder_defect(const OperatorFamily& family, double t, double s, double gamma);

struct ShiftSearchResult {
  double mu_star = 0.0;
  std::vector<std::pair<double, double>> table;  // (mu, ||Q||)
  bool nonincreasing = true;                     // within 5 %
};

/// Smallest sampled mu with ||Q_mu|| <= target (q, p the mixed-norm exponents).
/// Throws ExhaustedError with the table when no sample reaches the target.
ShiftSearchResult shift_search(const OperatorFamily& family, const std::vector<double>& mu_grid, double target,
                               double q_time, double p_space, const QNormOptions& opts = {});

}  // namespace mrlab
