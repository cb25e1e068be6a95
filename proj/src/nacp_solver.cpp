#include "mrlab/nacp_solver.hpp"

#include <algorithm>
#include <limits>

namespace mrlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Budget (in doubles) for the per-pair kernel cache on non-uniform grids.
constexpr double kKernelCacheBudget = 3e7;

bool is_uniform(const std::vector<double>& t) {
  const double dt = t[1] - t[0];
  for (std::size_t i = 2; i < t.size(); ++i)
    if (std::abs((t[i] - t[i - 1]) - dt) > 1e-12 * t.back()) return false;
  return true;
}

MatrixXd inverse_or_throw(const MatrixXd& A, const char* who) {
  Eigen::FullPivLU<MatrixXd> lu(A);
  if (!lu.isInvertible())
    throw SingularityError(std::string(who) + ": singular operator; shift the family (mu > 0)");
  return lu.inverse();
}

double plain_p(const VectorXd& v, double p) { return lp_norm(VectorXd::Ones(v.size()), p, v); }

}  // namespace

void NacpProblem::validate() const {
  if (family.nodes() < 2) throw DomainError("NacpProblem: need at least one time cell");
  if (u0.size() != family.size()) throw DomainError("NacpProblem: u0 size mismatch");
  if (static_cast<int>(f.size()) != family.nodes()) throw DomainError("NacpProblem: forcing grid mismatch");
  for (const auto& v : f)
    if (v.size() != family.size()) throw DomainError("NacpProblem: forcing size mismatch");
  if (!(p_space >= 1.0) || !(q_time >= 1.0)) throw DomainError("NacpProblem: exponents must be >= 1");
  if (!u0.allFinite()) throw DomainError("NacpProblem: non-finite u0");
}

Trajectory zero_trajectory(const OperatorFamily& family) {
  return Trajectory(family.times.size(), VectorXd::Zero(family.size()));
}

Trajectory sample_in_time(const OperatorFamily& family, const std::function<VectorXd(double)>& g) {
  Trajectory out;
  for (double t : family.times) {
    out.push_back(g(t));
    if (out.back().size() != family.size()) throw DomainError("sample_in_time: size mismatch");
  }
  return out;
}

Trajectory assemble_R(const OperatorFamily& family, const VectorXd& u0) {
  if (u0.size() != family.size()) throw DomainError("assemble_R: size mismatch");
  Trajectory out;
  for (int i = 0; i < family.nodes(); ++i) {
    const MatrixXd& A = family.matrices[static_cast<std::size_t>(i)];
    out.push_back(A * (mat_exp(A, family.times[static_cast<std::size_t>(i)]) * u0));
  }
  return out;
}

Trajectory assemble_S(const OperatorFamily& family, const Trajectory& f) {
  const int nodes = family.nodes();
  if (static_cast<int>(f.size()) != nodes) throw DomainError("assemble_S: forcing grid mismatch");
  const auto& t = family.times;
  const Eigen::Index n = family.size();
  Trajectory out(static_cast<std::size_t>(nodes), VectorXd::Zero(n));
  const bool uniform = is_uniform(t);
  for (int i = 1; i < nodes; ++i) {
    const MatrixXd& A = family.matrices[static_cast<std::size_t>(i)];
    if (uniform) {
      const MatrixXd E = mat_exp(A, t[1] - t[0]);
      VectorXd acc = f[1];
      for (int j = 2; j <= i; ++j) acc = E * acc + f[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(i)] = acc - E * acc;
    } else {
      MatrixXd prev = mat_exp(A, t[static_cast<std::size_t>(i)] - t[0]);
      VectorXd acc = VectorXd::Zero(n);
      for (int j = 1; j <= i; ++j) {
        const MatrixXd next = mat_exp(A, t[static_cast<std::size_t>(i)] - t[static_cast<std::size_t>(j)]);
        acc += (next - prev) * f[static_cast<std::size_t>(j)];
        prev = next;
      }
      out[static_cast<std::size_t>(i)] = acc;
    }
  }
  return out;
}

// --- Q ---------------------------------------------------------------------

struct QOperator::Impl {
  int m = 0;
  Eigen::Index n = 0;
  bool uniform = true;
  std::vector<MatrixXd> Ainv;  // A_i^{-1}, i = 0..m
  std::vector<MatrixXd> B;     // A(midpoint of cell j)^{-1}, j = 1..m (index 0 unused)
  std::vector<MatrixXd> E;     // uniform: e^{-dt A_i}
  std::vector<MatrixXd> P;     // uniform: A_i (I - E_i)
  // Non-uniform: K[i][j-1] = A_i (e^{-(t_i - t_j) A_i} - e^{-(t_i - t_{j-1}) A_i}).
  std::vector<std::vector<MatrixXd>> K;
  std::vector<Eigen::PartialPivLU<MatrixXd>> diag_lu;  // I - Q_ii

  MatrixXd diag_block(int i) const {
    const auto ui = static_cast<std::size_t>(i);
    const MatrixXd D = B[ui] - Ainv[ui];
    return uniform ? MatrixXd(P[ui] * D) : MatrixXd(K[ui][ui - 1] * D);
  }

  // sum_{j in [1, last]} kernel(i, j) (B_j g_j - A_i^{-1} g_j)
  VectorXd row(int i, int last, const Trajectory& g, const Trajectory& h) const {
    const auto ui = static_cast<std::size_t>(i);
    if (last < 1) return VectorXd::Zero(n);
    if (uniform) {
      VectorXd s1 = h[1], s2 = g[1];
      for (int j = 2; j <= last; ++j) {
        s1 = E[ui] * s1 + h[static_cast<std::size_t>(j)];
        s2 = E[ui] * s2 + g[static_cast<std::size_t>(j)];
      }
      for (int k = last; k < i; ++k) {
        s1 = E[ui] * s1;
        s2 = E[ui] * s2;
      }
      return P[ui] * (s1 - Ainv[ui] * s2);
    }
    VectorXd s1 = VectorXd::Zero(n), s2 = VectorXd::Zero(n);
    for (int j = 1; j <= last; ++j) {
      s1 += K[ui][static_cast<std::size_t>(j - 1)] * h[static_cast<std::size_t>(j)];
      s2 += K[ui][static_cast<std::size_t>(j - 1)] * g[static_cast<std::size_t>(j)];
    }
    return s1 - Ainv[ui] * s2;
  }
};

QOperator::QOperator(const OperatorFamily& family) : impl_(std::make_unique<Impl>()) {
  Impl& q = *impl_;
  const auto& t = family.times;
  q.m = family.nodes() - 1;
  q.n = family.size();
  if (q.m < 1) throw DomainError("QOperator: need at least one time cell");
  q.uniform = is_uniform(t);
  if (!q.uniform && 0.5 * q.m * (q.m + 1.0) * static_cast<double>(q.n * q.n) > kKernelCacheBudget)
    throw ResourceError("QOperator: non-uniform grid too large for the kernel cache");
  const Eigen::Index n = q.n;
  const MatrixXd I = MatrixXd::Identity(n, n);
  q.Ainv.resize(static_cast<std::size_t>(q.m + 1));
  q.B.resize(static_cast<std::size_t>(q.m + 1));
  for (int i = 0; i <= q.m; ++i)
    q.Ainv[static_cast<std::size_t>(i)] = inverse_or_throw(family.matrices[static_cast<std::size_t>(i)], "QOperator");
  for (int j = 1; j <= q.m; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    q.B[uj] = inverse_or_throw(family.at(0.5 * (t[uj - 1] + t[uj])), "QOperator");
  }
  if (q.uniform) {
    q.E.resize(static_cast<std::size_t>(q.m + 1));
    q.P.resize(static_cast<std::size_t>(q.m + 1));
    const double dt = t[1] - t[0];
    for (int i = 1; i <= q.m; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const MatrixXd& A = family.matrices[ui];
      q.E[ui] = mat_exp(A, dt);
      q.P[ui] = A * (I - q.E[ui]);
    }
  } else {
    q.K.resize(static_cast<std::size_t>(q.m + 1));
    for (int i = 1; i <= q.m; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const MatrixXd& A = family.matrices[ui];
      MatrixXd prev = mat_exp(A, t[ui] - t[0]);
      for (int j = 1; j <= i; ++j) {
        const MatrixXd next = mat_exp(A, t[ui] - t[static_cast<std::size_t>(j)]);
        q.K[ui].push_back(A * (next - prev));
        prev = next;
      }
    }
  }
  q.diag_lu.resize(static_cast<std::size_t>(q.m + 1));
  for (int i = 1; i <= q.m; ++i) q.diag_lu[static_cast<std::size_t>(i)].compute(I - q.diag_block(i));
}

QOperator::~QOperator() = default;
QOperator::QOperator(QOperator&&) noexcept = default;
QOperator& QOperator::operator=(QOperator&&) noexcept = default;

int QOperator::steps() const { return impl_->m; }
Eigen::Index QOperator::block_size() const { return impl_->n; }
bool QOperator::uniform() const { return impl_->uniform; }

Trajectory QOperator::apply(const Trajectory& g) const {
  const Impl& q = *impl_;
  if (static_cast<int>(g.size()) != q.m + 1) throw DomainError("QOperator::apply: trajectory length mismatch");
  Trajectory h(g.size(), VectorXd::Zero(q.n));
  for (int j = 1; j <= q.m; ++j) h[static_cast<std::size_t>(j)] = q.B[static_cast<std::size_t>(j)] * g[static_cast<std::size_t>(j)];
  Trajectory out(g.size(), VectorXd::Zero(q.n));
  for (int i = 1; i <= q.m; ++i) out[static_cast<std::size_t>(i)] = q.row(i, i, g, h);
  return out;
}

Trajectory QOperator::apply_transpose(const Trajectory& y) const {
  const Impl& q = *impl_;
  if (static_cast<int>(y.size()) != q.m + 1) throw DomainError("QOperator::apply_transpose: trajectory length mismatch");
  Trajectory acc(y.size(), VectorXd::Zero(q.n)), dacc(y.size(), VectorXd::Zero(q.n));
  for (int i = 1; i <= q.m; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (q.uniform) {
      VectorXd c = q.P[ui].transpose() * y[ui];
      VectorXd d = q.Ainv[ui].transpose() * c;
      for (int j = i; j >= 1; --j) {
        acc[static_cast<std::size_t>(j)] += c;
        dacc[static_cast<std::size_t>(j)] += d;
        if (j > 1) {
          c = q.E[ui].transpose() * c;
          d = q.E[ui].transpose() * d;
        }
      }
    } else {
      for (int j = 1; j <= i; ++j) {
        const VectorXd c = q.K[ui][static_cast<std::size_t>(j - 1)].transpose() * y[ui];
        acc[static_cast<std::size_t>(j)] += c;
        dacc[static_cast<std::size_t>(j)] += q.Ainv[ui].transpose() * c;
      }
    }
  }
  Trajectory out(y.size(), VectorXd::Zero(q.n));
  for (int j = 1; j <= q.m; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    out[uj] = q.B[uj].transpose() * acc[uj] - dacc[uj];
  }
  return out;
}

MatrixXd QOperator::block(int i, int j) const {
  const Impl& q = *impl_;
  if (!(1 <= j && j <= i && i <= q.m)) throw DomainError("QOperator::block: index out of range");
  const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
  const MatrixXd D = q.B[uj] - q.Ainv[ui];
  if (!q.uniform) return q.K[ui][uj - 1] * D;
  MatrixXd kernel = q.P[ui];
  for (int k = j; k < i; ++k) kernel = kernel * q.E[ui];
  return kernel * D;
}

MatrixXd QOperator::dense() const {
  const Impl& q = *impl_;
  MatrixXd out = MatrixXd::Zero(q.m * q.n, q.m * q.n);
  for (int i = 1; i <= q.m; ++i)
    for (int j = 1; j <= i; ++j) out.block((i - 1) * q.n, (j - 1) * q.n, q.n, q.n) = block(i, j);
  return out;
}

Trajectory QOperator::solve_identity_minus(const Trajectory& b) const {
  const Impl& q = *impl_;
  if (static_cast<int>(b.size()) != q.m + 1) throw DomainError("QOperator::solve: trajectory length mismatch");
  Trajectory w(b.size(), VectorXd::Zero(q.n)), h(b.size(), VectorXd::Zero(q.n));
  w[0] = b[0];
  for (int i = 1; i <= q.m; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const VectorXd rhs = b[ui] + q.row(i, i - 1, w, h);
    w[ui] = q.diag_lu[ui].solve(rhs);
    h[ui] = q.B[ui] * w[ui];
  }
  return w;
}

MatrixXd assemble_Q(const OperatorFamily& family) { return QOperator(family).dense(); }

double mixed_norm(const Trajectory& traj, const OperatorFamily& family, double q_time, double p_space) {
  if (static_cast<int>(traj.size()) != family.nodes()) throw DomainError("mixed_norm: trajectory grid mismatch");
  if (!(q_time >= 1.0)) throw DomainError("mixed_norm: q must be >= 1");
  std::vector<double> spatial;
  double scale = 0.0;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    spatial.push_back(lp_norm(family.weights, p_space, traj[i]));
    scale = std::max(scale, spatial.back());
  }
  if (std::isinf(q_time) || scale == 0.0) return scale;
  double acc = 0.0;
  for (std::size_t i = 1; i < traj.size(); ++i)
    acc += (family.times[i] - family.times[i - 1]) * std::pow(spatial[i - 1] / scale, q_time);
  return scale * std::pow(acc, 1.0 / q_time);
}

// --- norm of Q -------------------------------------------------------------

namespace {

double stacked_norm(const Trajectory& x, double q, double p) {
  VectorXd blocks(static_cast<Eigen::Index>(x.size()) - 1);
  for (std::size_t i = 1; i < x.size(); ++i) blocks(static_cast<Eigen::Index>(i - 1)) = plain_p(x[i], p);
  return plain_p(blocks, q);
}

// Unit vector of the dual mixed space norming y.
Trajectory mixed_duality(const Trajectory& y, double q, double p) {
  const double total = stacked_norm(y, q, p);
  Trajectory out(y.size(), VectorXd::Zero(y[0].size()));
  if (total == 0.0) return out;
  for (std::size_t i = 1; i < y.size(); ++i) {
    const double ni = plain_p(y[i], p);
    if (ni == 0.0) continue;
    const double outer = std::pow(ni / total, q - 1.0);
    for (Eigen::Index k = 0; k < y[i].size(); ++k) {
      const double a = std::abs(y[i](k));
      if (a == 0.0) continue;
      out[i](k) = outer * std::copysign(std::pow(a / ni, p - 1.0), y[i](k));
    }
  }
  return out;
}

}  // namespace

double q_norm_estimate(const QOperator& Q, const OperatorFamily& family, double q_time, double p_space,
                       const QNormOptions& opts) {
  if (!(q_time > 1.0 && q_time < kInf && p_space > 1.0 && p_space < kInf))
    throw DomainError("q_norm_estimate: exponents must lie in (1, inf)");
  const int m = Q.steps();
  const Eigen::Index n = Q.block_size();
  if (family.nodes() != m + 1 || family.size() != n) throw DomainError("q_norm_estimate: family mismatch");
  // Scaling S: g -> dt_i^{1/q} w^{1/p} g_i maps L^q(l^p_w) isometrically onto plain l^q(l^p).
  std::vector<VectorXd> scale(static_cast<std::size_t>(m + 1));
  for (int i = 1; i <= m; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double dt = family.times[ui] - family.times[ui - 1];
    scale[ui] = std::pow(dt, 1.0 / q_time) * family.weights.array().pow(1.0 / p_space).matrix();
  }
  auto apply = [&](const Trajectory& x) {
    Trajectory g(x.size(), VectorXd::Zero(n));
    for (int i = 1; i <= m; ++i) g[i] = x[i].cwiseQuotient(scale[i]);
    Trajectory y = Q.apply(g);
    for (int i = 1; i <= m; ++i) y[i] = y[i].cwiseProduct(scale[i]);
    return y;
  };
  auto apply_t = [&](const Trajectory& y) {
    Trajectory z(y.size(), VectorXd::Zero(n));
    for (int i = 1; i <= m; ++i) z[i] = y[i].cwiseProduct(scale[i]);
    Trajectory x = Q.apply_transpose(z);
    for (int i = 1; i <= m; ++i) x[i] = x[i].cwiseQuotient(scale[i]);
    return x;
  };
  const double qc = q_time / (q_time - 1.0), pc = p_space / (p_space - 1.0);
  Rng rng(opts.seed);
  double best = 0.0;
  for (int r = 0; r < opts.restarts; ++r) {
    Trajectory x(static_cast<std::size_t>(m + 1), VectorXd::Zero(n));
    for (int i = 1; i <= m; ++i)
      for (Eigen::Index k = 0; k < n; ++k) x[i](k) = r == 0 ? 1.0 : rng.normal();
    const double nx = stacked_norm(x, q_time, p_space);
    for (auto& v : x) v /= nx;
    double prev = -1.0;
    for (int it = 0; it < opts.max_iterations; ++it) {
      const Trajectory y = apply(x);
      const double val = stacked_norm(y, q_time, p_space);
      best = std::max(best, val);
      if (val == 0.0 || std::abs(val - prev) <= opts.tol * val) break;
      prev = val;
      const Trajectory z = apply_t(mixed_duality(y, q_time, p_space));
      if (stacked_norm(z, qc, pc) == 0.0) break;
      x = mixed_duality(z, qc, pc);
    }
  }
  return best;
}

// --- solvers ---------------------------------------------------------------

MRSolveResult solve_at(const NacpProblem& problem, const SolveStrategy& strategy, bool estimate_q_norm) {
  problem.validate();
  const OperatorFamily& fam = problem.family;
  const QOperator Q(fam);
  const Trajectory R = assemble_R(fam, problem.u0);
  const Trajectory S = assemble_S(fam, problem.f);
  Trajectory b(R.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = R[i] + S[i];

  MRSolveResult res;
  const bool neumann = std::holds_alternative<Neumann>(strategy);
  if (estimate_q_norm || neumann) res.q_norm = q_norm_estimate(Q, fam, problem.q_time, problem.p_space);

  Trajectory w;
  if (!neumann) {
    w = Q.solve_identity_minus(b);
  } else {
    const Neumann& opt = std::get<Neumann>(strategy);
    if (*res.q_norm >= 1.0)
      throw ContractionError("solve_at: ||Q|| >= 1, Neumann series not applicable; run shift_search");
    w = b;
    bool converged = false;
    double prev_diff = kInf;
    for (int k = 1; k <= opt.max_iter; ++k) {
      Trajectory next = Q.apply(w);
      double diff = 0.0, size = 0.0;
      for (std::size_t i = 0; i < next.size(); ++i) {
        next[i] += b[i];
        diff = std::max(diff, (next[i] - w[i]).cwiseAbs().maxCoeff());
        size = std::max(size, next[i].cwiseAbs().maxCoeff());
      }
      w = std::move(next);
      res.neumann_iters = k;
      if (!std::isfinite(diff)) break;
      // Stop at the tolerance, or once the increments stall at rounding level.
      if (diff <= opt.tol * size || (diff > 0.5 * prev_diff && diff <= 1e-9 * size)) {
        converged = true;
        break;
      }
      prev_diff = diff;
    }
    if (!converged) throw ContractionError("solve_at: Neumann series did not converge; run shift_search");
  }

  const int nodes = fam.nodes();
  res.Au = w;
  res.u.resize(static_cast<std::size_t>(nodes));
  res.udot.resize(static_cast<std::size_t>(nodes));
  res.u[0] = problem.u0;
  for (int i = 1; i < nodes; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    res.u[ui] = fam.matrices[ui].partialPivLu().solve(w[ui]);
  }
  for (int i = 0; i < nodes; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    res.udot[ui] = problem.f[ui] - w[ui];
  }
  res.c_mr = mr_constant(problem, res);
  return res;
}

Trajectory cn_oracle(const NacpProblem& problem, int refine) {
  problem.validate();
  if (refine < 1) throw DomainError("cn_oracle: refine must be >= 1");
  const OperatorFamily& fam = problem.family;
  const Eigen::Index n = fam.size();
  const MatrixXd I = MatrixXd::Identity(n, n);
  Trajectory out;
  out.push_back(problem.u0);
  VectorXd u = problem.u0;
  for (int i = 1; i < fam.nodes(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double t0 = fam.times[ui - 1];
    const double d = (fam.times[ui] - t0) / refine;
    for (int k = 0; k < refine; ++k) {
      const MatrixXd A = fam.at(t0 + (k + 0.5) * d);
      Eigen::PartialPivLU<MatrixXd> lu(I + 0.5 * d * A);
      u = lu.solve(u - 0.5 * d * (A * u) + d * problem.f[ui]);
    }
    if (!u.allFinite()) throw ConvergenceError("cn_oracle: non-finite state");
    out.push_back(u);
  }
  return out;
}

std::optional<double> mr_constant(const NacpProblem& problem, MRSolveResult& result) {
  const OperatorFamily& fam = problem.family;
  const double q = problem.q_time, p = problem.p_space;
  result.norms.udot = mixed_norm(result.udot, fam, q, p);
  result.norms.Au = mixed_norm(result.Au, fam, q, p);
  result.norms.f = mixed_norm(problem.f, fam, q, p);
  result.norms.u0_interp = 0.0;
  if (problem.u0.cwiseAbs().maxCoeff() > 0.0) {
    if (!(q > 1.0)) throw DomainError("mr_constant: q must exceed 1 for the initial-value space");
    const WeightedSpace space{fam.weights, p};
    result.norms.u0_interp =
        real_interp_norm(fam.matrices.front(), space, 1.0 / q, q, problem.u0, CoupleOrder::domain_first);
  }
  const double denom = result.norms.f + result.norms.u0_interp;
  if (denom == 0.0) return std::nullopt;
  return (result.norms.udot + result.norms.Au) / denom;
}

}  // namespace mrlab
