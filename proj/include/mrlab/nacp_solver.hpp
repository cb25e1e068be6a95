#pragma once

// Discrete non-autonomous Cauchy problem  u' + A(t) u = f,  u(0) = u0.
//
// The primary solver works with w = A(.)u(.) and the integral equation
//   (I - Q) w = S f + R u0
// in which every cell integral of the semigroup kernel is evaluated exactly for
// piecewise-constant data. Data are piecewise constant with the value at the
// right end of each cell: on (t_{j-1}, t_j] the forcing is f_j and w is w_j.
// A(s)^{-1} inside Q is frozen at the cell midpoint.

#include <memory>
#include <optional>
#include <variant>

#include "mrlab/common.hpp"
#include "mrlab/discretizer.hpp"
#include "mrlab/sectorial.hpp"

namespace mrlab {

struct NacpProblem {
  OperatorFamily family;
  VectorXd u0;
  Trajectory f;  // one vector per time node; f[0] only enters udot(0)
  double p_space = 2.0;
  double q_time = 2.0;

  double horizon() const { return family.horizon(); }
  void validate() const;
};

/// Zero forcing on the family's grid.
Trajectory zero_trajectory(const OperatorFamily& family);

/// Samples g(t) on the family's grid.
Trajectory sample_in_time(const OperatorFamily& family, const std::function<VectorXd(double)>& g);

struct MRNorms {
  double udot = 0.0;
  double Au = 0.0;
  double f = 0.0;
  double u0_interp = 0.0;
};

struct MRSolveResult {
  Trajectory u;
  Trajectory udot;
  Trajectory Au;
  std::optional<double> q_norm;  // power-iteration estimate of ||Q|| on L^q(l^p_w)
  int neumann_iters = 0;
  std::optional<double> c_mr;  // empty when both data vanish
  MRNorms norms;
};

struct DirectBlock {};
struct Neumann {
  int max_iter = 500;
  double tol = 1e-11;
};
using SolveStrategy = std::variant<DirectBlock, Neumann>;

/// (R u0)(t_i) = A_i e^{-t_i A_i} u0.
Trajectory assemble_R(const OperatorFamily& family, const VectorXd& u0);

/// (S f)(t_i) = sum_{j<=i} [e^{-(t_i - t_j) A_i} - e^{-(t_i - t_{j-1}) A_i}] f_j.
Trajectory assemble_S(const OperatorFamily& family, const Trajectory& f);

/// The block operator Q acting on trajectories indexed by the cells 1..m.
/// Index 0 of every trajectory is ignored on input and zero on output.
class QOperator {
 public:
  explicit QOperator(const OperatorFamily& family);
  ~QOperator();
  QOperator(QOperator&&) noexcept;
  QOperator& operator=(QOperator&&) noexcept;

  int steps() const;
  Eigen::Index block_size() const;
  bool uniform() const;

  Trajectory apply(const Trajectory& g) const;
  /// Transpose with respect to the plain Euclidean product of the stacked blocks.
  Trajectory apply_transpose(const Trajectory& y) const;

  /// Block (i, j) for 1 <= j <= i <= m.
  MatrixXd block(int i, int j) const;
  /// Dense (m n) x (m n) matrix of cells 1..m; for tests and small problems.
  MatrixXd dense() const;

  /// Solves (I - Q) w = b by block forward substitution (w[0] = b[0]).
  Trajectory solve_identity_minus(const Trajectory& b) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

MatrixXd assemble_Q(const OperatorFamily& family);

/// Right-endpoint rule (sum_{i>=1} dt_i ||v_i||_{l^p_w}^q)^{1/q}.
double mixed_norm(const Trajectory& traj, const OperatorFamily& family, double q_time, double p_space);

struct QNormOptions {
  int restarts = 3;
  int max_iterations = 80;
  double tol = 1e-10;
  std::uint64_t seed = 0x0A7Bu;
};

/// Power-iteration estimate (a lower bound) of ||Q|| on L^q(0,T; l^p_w) with the
/// right-endpoint mixed norm.
double q_norm_estimate(const QOperator& Q, const OperatorFamily& family, double q_time, double p_space,
                       const QNormOptions& opts = {});

/// Direct block solves estimate ||Q|| only on request; the Neumann strategy
/// always does (and refuses when the estimate is >= 1).
MRSolveResult solve_at(const NacpProblem& problem, const SolveStrategy& strategy = DirectBlock{},
                       bool estimate_q_norm = false);

/// Crank-Nicolson on a grid refined `refine` times, A frozen at substep
/// midpoints and f_i held on cell i; returns values at the problem's nodes.
Trajectory cn_oracle(const NacpProblem& problem, int refine);

/// (||udot|| + ||Au||) / (||f|| + ||u0||_{(D(A(0)), X)_{1/q, q}}); empty when the
/// denominator vanishes. Also fills result.norms.
std::optional<double> mr_constant(const NacpProblem& problem, MRSolveResult& result);

}  // namespace mrlab
