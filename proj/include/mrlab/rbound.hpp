#pragma once

// Rademacher averages, R- and R_q-bound lower estimates, brute-force Khintchine
// constants and pointwise Gaussian domination of discrete heat kernels.

#include <cstdint>
#include <vector>

#include "mrlab/common.hpp"
#include "mrlab/discretizer.hpp"
#include "mrlab/sectorial.hpp"

namespace mrlab {

inline constexpr int kMaxExactTerms = 14;

struct Expectation {
  bool exact = true;
  std::uint64_t seed = 1;
  long trials = 100000;

  static Expectation enumerate() { return {}; }
  static Expectation sampled(std::uint64_t seed, long trials) { return {false, seed, trials}; }
};

/// E||sum eps_j T_j x_j|| / E||sum eps_j x_j|| on the weighted space.
double rademacher_ratio(const std::vector<MatrixXcd>& ops, const std::vector<VectorXcd>& vecs,
                        const WeightedSpace& space, const Expectation& mode = {});
double rademacher_ratio(const std::vector<MatrixXd>& ops, const std::vector<VectorXd>& vecs,
                        const WeightedSpace& space, const Expectation& mode = {});

/// E||sum eps_j y_j|| by enumeration (k <= kMaxExactTerms) or sampling.
double rademacher_mean(const std::vector<VectorXcd>& terms, const WeightedSpace& space, const Expectation& mode);

enum class RMode { rademacher, rq };

struct RWitness {
  std::vector<Complex> lambdas;
  std::vector<int> time_indices;
  std::vector<VectorXcd> vectors;
};

struct RBoundReport {
  RMode mode = RMode::rademacher;
  double q = 2.0;
  double estimate = 0.0;
  RWitness witness;
  long trials = 0;
  std::uint64_t seed = 0;
};

struct RBoundOptions {
  LambdaGrid grid;
  long budget = 4000;  // ratio evaluations
  int restarts = 8;
  std::uint64_t seed = 7;
};

/// Greedy/random search maximizing the Rademacher ratio over selections
/// T_j = (1 + |lambda_j|) R(lambda_j, A(t_j)) and vectors x_j, j <= k_max.
RBoundReport r_bound_estimate(const OperatorFamily& family, double phi, int k_max, const RBoundOptions& options = {});

/// ||(sum |T_j f_j|^q)^{1/q}||_p / ||(sum |f_j|^q)^{1/q}||_p with per-node sums.
double rq_square_ratio(const std::vector<MatrixXd>& ops, const std::vector<VectorXd>& vecs,
                       const WeightedSpace& space, double q);

struct KhintchineConstants {
  double lower = 0.0;  // E||sum eps_j x_j|| / ||(sum |x_j|^2)^{1/2}||
  double upper = 0.0;  // the reciprocal
};

KhintchineConstants khintchine_check(const std::vector<VectorXd>& vecs, const WeightedSpace& space);

enum class Envelope {
  analytic,  // C s^{-N/2} e^{omega1 s} exp(-|x-y|^2 / (4 beta s))
  lattice,   // C (4 pi beta)^{N/2} e^{omega1 s} k_h(x - y, beta s), k_h the free lattice kernel
};

struct GaussianParams {
  double C = 1.0 / std::sqrt(4.0 * kPi);
  double beta = 1.0;
  double omega1 = 0.0;
  Envelope envelope = Envelope::lattice;
  double tolerance = 1e-6;
};

/// Analytic envelope value for squared distance d2 in dimension N.
double gaussian_envelope(const GaussianParams& params, int N, double d2, double s);

/// e^{-z} I_n(z) for n = 0..n_max.
std::vector<double> scaled_bessel_i(double z, int n_max);

/// Free heat kernel of the h-lattice Laplacian in one dimension at offset n h.
std::vector<double> lattice_heat_kernel(double h, double s, int n_max);

struct GaussianReport {
  double s = 0.0;
  double max_ratio = 0.0;
  bool pass = false;
  int witness_i = -1;
  int witness_j = -1;
  double continuum_ratio = 0.0;  // against the analytic envelope, diagnostic
  long unresolved = 0;           // entries below the kernel's rounding floor
};

/// Compares k(x_i, x_j, s) = [e^{-s A}]_{ij} / w_j with the chosen envelope.
std::vector<GaussianReport> gaussian_domination(const MatrixXd& A, const VectorXd& weights, const Mesh& mesh,
                                                BoundaryCondition bc, const std::vector<double>& s_list,
                                                const GaussianParams& params);

std::vector<GaussianReport> gaussian_domination(const OperatorFamily& family, const Mesh& mesh,
                                                const std::vector<double>& s_list, const GaussianParams& params,
                                                int time_index = 0);

}  // namespace mrlab
