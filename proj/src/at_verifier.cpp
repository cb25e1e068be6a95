#include "mrlab/at_verifier.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <optional>

#include <Eigen/Eigenvalues>

namespace mrlab {

namespace {

MatrixXd inverse_difference(const MatrixXd& At, const MatrixXd& As) {
  const Eigen::Index n = At.rows();
  return At.partialPivLu().solve(MatrixXd::Identity(n, n)) - As.partialPivLu().solve(MatrixXd::Identity(n, n));
}

// A R(lambda, A) D = (lambda R(lambda, A) - I) D.
NormBounds at_norm(const MatrixXd& At, const MatrixXd& diff, const std::vector<Complex>& eig, Complex lambda,
                   const WeightedSpace& space, const PowerIterationOptions& opts = {}) {
  const MatrixXcd D = diff.cast<Complex>();
  const MatrixXcd M = lambda * (resolvent(At, lambda, &eig) * D) - D;
  return induced_norm(M, space, opts);
}

bool weighted_symmetric(const MatrixXd& A, const VectorXd& w) {
  const MatrixXd K = w.asDiagonal() * A;
  return (K - K.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * K.cwiseAbs().maxCoeff();
}

// For A(t), A(s) self-adjoint on weighted l^2 write D^{1/2} A(t) D^{-1/2} = U L U^T
// and E = U^T D^{1/2} (A(t)^{-1} - A(s)^{-1}) D^{-1/2}. The operator norm at
// lambda is then sqrt(lambda_max(G F G)) with F = E E^T and G = |L / (lambda - L)|.
struct SymmetricAtNorm {
  VectorXd eig;
  MatrixXd F;

  SymmetricAtNorm(const MatrixXd& At, const MatrixXd& diff, const VectorXd& w) {
    const VectorXd d = w.cwiseSqrt();
    const MatrixXd S = d.asDiagonal() * At * d.cwiseInverse().asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()));
    eig = es.eigenvalues();
    const MatrixXd E = es.eigenvectors().transpose() * (d.asDiagonal() * diff * d.cwiseInverse().asDiagonal());
    F = E * E.transpose();
  }

  double operator()(Complex lambda) const {
    VectorXd g(eig.size());
    for (Eigen::Index k = 0; k < eig.size(); ++k) g(k) = std::abs(eig(k) / (lambda - eig(k)));
    const MatrixXd H = g.asDiagonal() * F * g.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(H, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  }
};

}  // namespace

NormBounds at_operator_norm(const OperatorFamily& family, double t, double s, Complex lambda) {
  if (t == s) return {0.0, 0.0};
  const MatrixXd At = family.at(t), As = family.at(s);
  if (At == As) return {0.0, 0.0};
  return at_norm(At, inverse_difference(At, As), spectrum(At), lambda, {family.weights, family.p});
}

std::vector<std::pair<double, double>> anchored_pairs(double t0, double min_sep, double max_sep, int count) {
  if (count < 2 || !(min_sep > 0.0) || !(max_sep > min_sep)) throw DomainError("anchored_pairs: bad separations");
  std::vector<std::pair<double, double>> out;
  for (int k = 0; k < count; ++k)
    out.emplace_back(t0, t0 + min_sep * std::pow(max_sep / min_sep, static_cast<double>(k) / (count - 1)));
  return out;
}

ATFit at_fit(const OperatorFamily& family, const AtFitOptions& options) {
  if (options.pairs.size() < 8) throw DomainError("at_fit: at least 8 time pairs required");
  if (options.decades < 6) throw DomainError("at_fit: at least 6 lambda decades required");
  ATFit fit;
  fit.ray_angles = options.ray_angles;
  fit.pairs = options.pairs;
  const WeightedSpace space{family.weights, family.p};

  double rho = 0.0, smallest = std::numeric_limits<double>::infinity();
  for (const MatrixXd& A : family.matrices)
    for (const Complex& z : spectrum(A)) {
      rho = std::max(rho, std::abs(z));
      smallest = std::min(smallest, std::abs(z));
    }
  const double large0 = 10.0 * rho;
  const int n_large = options.decades * options.per_decade + 1;
  std::vector<double> large;
  for (int k = 0; k < n_large; ++k) large.push_back(large0 * std::pow(10.0, static_cast<double>(k) / options.per_decade));
  std::vector<double> small;
  const double small0 = options.small_factor * smallest;
  const int n_small = std::max(2, static_cast<int>(std::ceil(std::log10(large0 / small0) * options.per_decade)));
  for (int k = 0; k < n_small; ++k) small.push_back(small0 * std::pow(large0 / small0, static_cast<double>(k) / n_small));
  fit.radii = small;
  fit.radii.insert(fit.radii.end(), large.begin(), large.end());

  // Only the upper bounds enter the fit.
  PowerIterationOptions cheap;
  cheap.restarts = -1;
  // norms[pair][radius] = max over rays and signs.
  std::vector<std::vector<double>> norms;
  bool any = false;
  for (const auto& [t, s] : options.pairs) {
    std::vector<double> row(fit.radii.size(), 0.0);
    if (t != s) {
      const MatrixXd At = family.at(t), As = family.at(s);
      if (At != As) {
        const MatrixXd diff = inverse_difference(At, As);
        std::optional<SymmetricAtNorm> sym;
        std::vector<Complex> eig;
        if (family.p == 2.0 && weighted_symmetric(At, family.weights) && weighted_symmetric(As, family.weights))
          sym.emplace(At, diff, family.weights);
        else
          eig = spectrum(At);
        for (std::size_t r = 0; r < fit.radii.size(); ++r)
          for (double a : options.ray_angles)
            for (double sign : {1.0, -1.0}) {
              if (a == kPi && sign < 0) continue;
              const Complex lambda = std::polar(fit.radii[r], sign * a);
              const double v = sym ? (*sym)(lambda) : at_norm(At, diff, eig, lambda, space, cheap).upper;
              row[r] = std::max(row[r], v);
            }
      }
    }
    for (double v : row) any = any || v > 0.0;
    norms.push_back(std::move(row));
  }
  if (!any) {
    fit.autonomous = true;
    return fit;
  }

  // Stage 1: decay exponent from the large-|lambda| slopes.
  std::vector<double> slopes;
  fit.r2_lambda = 1.0;
  for (const auto& row : norms) {
    std::vector<double> x, y;
    for (std::size_t r = small.size(); r < row.size(); ++r)
      if (row[r] > 0.0) {
        x.push_back(std::log(fit.radii[r]));
        y.push_back(std::log(row[r]));
      }
    if (x.size() < 2) continue;
    const LinearFit lf = least_squares_line(x, y);
    slopes.push_back(lf.slope);
    fit.r2_lambda = std::min(fit.r2_lambda, lf.r2);
  }
  if (slopes.empty()) throw DomainError("at_fit: no pair with nonzero large-lambda norms");
  double mean_slope = 0.0;
  for (double v : slopes) mean_slope += v;
  mean_slope /= static_cast<double>(slopes.size());
  fit.gamma_fit = 1.0 + mean_slope;

  // Stage 2: per-pair intercepts, worst case per separation, against log|t-s|.
  std::map<double, double> by_sep;
  for (std::size_t k = 0; k < norms.size(); ++k) {
    double c = 0.0;
    for (std::size_t r = 0; r < fit.radii.size(); ++r)
      c = std::max(c, norms[k][r] * (1.0 + std::pow(fit.radii[r], 1.0 - fit.gamma_fit)));
    if (c <= 0.0) continue;
    const double sep = std::abs(options.pairs[k].first - options.pairs[k].second);
    by_sep[sep] = std::max(by_sep[sep], c);
  }
  if (by_sep.size() < 2) throw DomainError("at_fit: fewer than two distinct nonzero separations");
  std::vector<double> x, y;
  for (const auto& [sep, c] : by_sep) {
    x.push_back(std::log(sep));
    y.push_back(std::log(c));
  }
  const LinearFit lf = least_squares_line(x, y);
  fit.beta_fit = lf.slope;
  fit.K_fit = std::exp(lf.intercept);
  fit.r2_time = lf.r2;
  fit.admissible = fit.beta_fit > fit.gamma_fit;
  return fit;
}

NormBounds holder_defect(const OperatorFamily& family, double t, double s, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("holder_defect: gamma must lie in [0, 1)");
  const MatrixXd At = family.at(t), As = family.at(s);
  if (t == s || At == As) return {0.0, 0.0};
  MatrixXd M = (At - As) * As.partialPivLu().solve(MatrixXd::Identity(As.rows(), As.cols()));
  if (gamma > 0.0) M = real_power(At, -gamma) * M;
  return induced_norm(M, {family.weights, family.p});
}

ShiftSearchResult shift_search(const OperatorFamily& family, const std::vector<double>& mu_grid, double target,
                               double q_time, double p_space, const QNormOptions& opts) {
  if (mu_grid.empty()) throw DomainError("shift_search: empty mu grid");
  for (std::size_t k = 0; k < mu_grid.size(); ++k) {
    if (!(mu_grid[k] >= 0.0)) throw DomainError("shift_search: shifts must be nonnegative");
    if (k > 0 && !(mu_grid[k] > mu_grid[k - 1])) throw DomainError("shift_search: mu grid must be ascending");
  }
  ShiftSearchResult res;
  bool found = false;
  for (double mu : mu_grid) {
    const OperatorFamily shifted = family.shifted(mu);
    const double qn = shifted.autonomous() ? 0.0 : q_norm_estimate(QOperator(shifted), shifted, q_time, p_space, opts);
    if (!res.table.empty() && qn > 1.05 * res.table.back().second) res.nonincreasing = false;
    res.table.emplace_back(mu, qn);
    if (!found && qn <= target) {
      found = true;
      res.mu_star = mu;
    }
  }
  if (!found) throw ExhaustedError("shift_search: no sampled shift reaches the target", res.table);
  return res;
}

}  // namespace mrlab
