#include "mrlab/rbound.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mrlab {

namespace {

template <typename V>
double wnorm(const WeightedSpace& space, const V& v) {
  return lp_norm(space.weights, space.p, v);
}

}  // namespace

double rademacher_mean(const std::vector<VectorXcd>& terms, const WeightedSpace& space, const Expectation& mode) {
  const std::size_t k = terms.size();
  if (k == 0) throw DomainError("rademacher_mean: no terms");
  for (const auto& v : terms)
    if (v.size() != space.size()) throw DomainError("rademacher_mean: size mismatch");
  if (mode.exact) {
    if (k > static_cast<std::size_t>(kMaxExactTerms))
      throw ResourceError("rademacher_mean: too many terms for exact enumeration");
    // eps_1 = +1 by symmetry; walk the remaining signs in Gray-code order.
    VectorXcd sum = VectorXcd::Zero(space.size());
    for (const auto& v : terms) sum += v;
    std::vector<int> sign(k, 1);
    const std::uint64_t patterns = std::uint64_t{1} << (k - 1);
    double acc = wnorm(space, sum);
    for (std::uint64_t g = 1; g < patterns; ++g) {
      const auto bit = static_cast<std::size_t>(__builtin_ctzll(g)) + 1;
      sum -= 2.0 * sign[bit] * terms[bit];
      sign[bit] = -sign[bit];
      acc += wnorm(space, sum);
    }
    return acc / static_cast<double>(patterns);
  }
  if (mode.trials < 1) throw DomainError("rademacher_mean: need at least one trial");
  Rng rng(mode.seed);
  double acc = 0.0;
  VectorXcd sum(space.size());
  for (long trial = 0; trial < mode.trials; ++trial) {
    sum.setZero();
    for (const auto& v : terms) {
      if (rng.sign())
        sum -= v;
      else
        sum += v;
    }
    acc += wnorm(space, sum);
  }
  return acc / static_cast<double>(mode.trials);
}

double rademacher_ratio(const std::vector<MatrixXcd>& ops, const std::vector<VectorXcd>& vecs,
                        const WeightedSpace& space, const Expectation& mode) {
  if (ops.size() != vecs.size() || ops.empty()) throw DomainError("rademacher_ratio: need k operators and k vectors");
  std::vector<VectorXcd> images;
  for (std::size_t j = 0; j < ops.size(); ++j) images.push_back(ops[j] * vecs[j]);
  const double den = rademacher_mean(vecs, space, mode);
  if (den == 0.0) throw UndefinedError("rademacher_ratio: zero denominator");
  return rademacher_mean(images, space, mode) / den;
}

double rademacher_ratio(const std::vector<MatrixXd>& ops, const std::vector<VectorXd>& vecs,
                        const WeightedSpace& space, const Expectation& mode) {
  std::vector<MatrixXcd> cops;
  std::vector<VectorXcd> cvecs;
  for (const auto& T : ops) cops.push_back(T.cast<Complex>());
  for (const auto& x : vecs) cvecs.push_back(x.cast<Complex>());
  return rademacher_ratio(cops, cvecs, space, mode);
}

// --- R-bound search ---------------------------------------------------------

namespace {

struct Candidate {
  Complex lambda;
  int time_index = 0;
  MatrixXcd op;
  double norm = 0.0;
  VectorXcd top;
};

}  // namespace

RBoundReport r_bound_estimate(const OperatorFamily& family, double phi, int k_max, const RBoundOptions& options) {
  if (k_max < 1) throw DomainError("r_bound_estimate: k_max must be >= 1");
  const WeightedSpace space{family.weights, family.p};
  const Eigen::Index n = family.size();
  VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = std::isinf(space.p) ? 1.0 : std::pow(space.weights(i), 1.0 / space.p);

  std::vector<Candidate> cands;
  for (int ti = 0; ti < family.nodes(); ++ti) {
    const MatrixXd& A = family.matrices[static_cast<std::size_t>(ti)];
    const std::vector<Complex> eig = spectrum(A);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const Complex& z : eig) {
      if (std::abs(z) == 0.0 || std::abs(std::arg(z)) >= phi)
        throw NotSectorialError("r_bound_estimate: eigenvalue outside the sector");
      lo = std::min(lo, std::abs(z));
      hi = std::max(hi, std::abs(z));
    }
    for (const Complex& lambda : lambda_samples(options.grid, phi, lo, hi)) {
      Candidate c;
      c.lambda = lambda;
      c.time_index = ti;
      c.op = (1.0 + std::abs(lambda)) * resolvent(A, lambda, &eig);
      c.norm = induced_norm(c.op, space).lower;
      MatrixXcd B(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) B(i, j) = c.op(i, j) * (d(i) / d(j));
      PowerIterationOptions pio;
      pio.restarts = 2;
      const VectorXcd v = boyd_power_iteration(B, space.p, pio).second;
      c.top = v.cwiseQuotient(d.cast<Complex>());
      cands.push_back(std::move(c));
    }
  }
  if (cands.empty()) throw DomainError("r_bound_estimate: empty lambda grid");

  RBoundReport rep;
  rep.seed = options.seed;
  std::size_t best_c = 0;
  for (std::size_t c = 1; c < cands.size(); ++c)
    if (cands[c].norm > cands[best_c].norm) best_c = c;
  rep.estimate = cands[best_c].norm;
  rep.witness = {{cands[best_c].lambda}, {cands[best_c].time_index}, {cands[best_c].top}};
  rep.trials = static_cast<long>(cands.size());
  if (k_max == 1) return rep;

  Rng rng(options.seed);
  const int k_hi = std::min(k_max, 8);
  const long per_restart = std::max<long>(1, options.budget / std::max(1, options.restarts));
  auto ratio = [&](const std::vector<std::size_t>& sel, const std::vector<VectorXcd>& xs) {
    std::vector<MatrixXcd> ops;
    for (std::size_t c : sel) ops.push_back(cands[c].op);
    ++rep.trials;
    try {
      return rademacher_ratio(ops, xs, space, Expectation::enumerate());
    } catch (const UndefinedError&) {
      return 0.0;
    }
  };
  for (int r = 0; r < options.restarts; ++r) {
    const int k = 2 + r % (k_hi - 1);
    std::vector<std::size_t> sel{best_c};
    while (static_cast<int>(sel.size()) < k) sel.push_back(rng.index(cands.size()));
    std::vector<VectorXcd> xs;
    for (std::size_t c : sel) xs.push_back(cands[c].top);
    double cur = ratio(sel, xs);
    for (long it = 0; it < per_restart; ++it) {
      auto sel2 = sel;
      auto xs2 = xs;
      const std::size_t j = rng.index(sel.size());
      switch (rng.index(3)) {
        case 0:
          sel2[j] = rng.index(cands.size());
          xs2[j] = cands[sel2[j]].top * (xs[j].norm() / std::max(cands[sel2[j]].top.norm(), 1e-300));
          break;
        case 1: {
          const double sigma = 0.3 * xs[j].norm() / std::sqrt(static_cast<double>(n));
          for (Eigen::Index i = 0; i < n; ++i) xs2[j](i) += sigma * rng.normal();
          break;
        }
        default:
          xs2[j] *= std::exp(rng.uniform(-1.0, 1.0));
          break;
      }
      const double val = ratio(sel2, xs2);
      if (val > cur) {
        cur = val;
        sel = std::move(sel2);
        xs = std::move(xs2);
      }
    }
    if (cur > rep.estimate) {
      rep.estimate = cur;
      rep.witness = {};
      for (std::size_t c : sel) {
        rep.witness.lambdas.push_back(cands[c].lambda);
        rep.witness.time_indices.push_back(cands[c].time_index);
      }
      rep.witness.vectors = xs;
    }
  }
  return rep;
}

double rq_square_ratio(const std::vector<MatrixXd>& ops, const std::vector<VectorXd>& vecs,
                       const WeightedSpace& space, double q) {
  if (ops.size() != vecs.size() || ops.empty()) throw DomainError("rq_square_ratio: need k operators and k vectors");
  if (!(q >= 1.0)) throw DomainError("rq_square_ratio: q must be >= 1");
  const Eigen::Index n = space.size();
  auto pointwise = [&](const std::vector<VectorXd>& vs) {
    VectorXd out = VectorXd::Zero(n);
    if (std::isinf(q)) {
      for (const auto& v : vs) out = out.cwiseMax(v.cwiseAbs());
      return out;
    }
    for (const auto& v : vs) out += v.cwiseAbs().array().pow(q).matrix();
    return VectorXd(out.array().pow(1.0 / q));
  };
  std::vector<VectorXd> images;
  for (std::size_t j = 0; j < ops.size(); ++j) {
    if (vecs[j].size() != n) throw DomainError("rq_square_ratio: size mismatch");
    images.push_back(ops[j] * vecs[j]);
  }
  const double den = wnorm(space, pointwise(vecs));
  if (den == 0.0) throw UndefinedError("rq_square_ratio: zero denominator");
  return wnorm(space, pointwise(images)) / den;
}

KhintchineConstants khintchine_check(const std::vector<VectorXd>& vecs, const WeightedSpace& space) {
  if (vecs.empty() || vecs.size() > 12) throw DomainError("khintchine_check: need 1..12 vectors");
  VectorXd square = VectorXd::Zero(space.size());
  std::vector<VectorXcd> terms;
  for (const auto& v : vecs) {
    if (v.size() != space.size()) throw DomainError("khintchine_check: size mismatch");
    square += v.cwiseAbs2();
    terms.push_back(v.cast<Complex>());
  }
  const double sq = wnorm(space, VectorXd(square.cwiseSqrt()));
  if (sq == 0.0) throw UndefinedError("khintchine_check: all-zero input");
  const double mean = rademacher_mean(terms, space, Expectation::enumerate());
  return {mean / sq, sq / mean};
}

// --- Gaussian domination ----------------------------------------------------

double gaussian_envelope(const GaussianParams& params, int N, double d2, double s) {
  if (!(s > 0.0)) throw DomainError("gaussian_envelope: s must be positive");
  return params.C * std::pow(s, -0.5 * N) * std::exp(params.omega1 * s - d2 / (4.0 * params.beta * s));
}

std::vector<double> scaled_bessel_i(double z, int n_max) {
  if (!(z >= 0.0) || n_max < 0) throw DomainError("scaled_bessel_i: bad arguments");
  std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);
  if (z == 0.0) {
    out[0] = 1.0;
    return out;
  }
  if (z <= 700.0) {
    out[0] = std::cyl_bessel_i(0.0, z) * std::exp(-z);
  } else {
    // Large-argument expansion with coefficients ((2k-1)!!)^2 / (k! 8^k).
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 30; ++k) {
      term *= (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * z);
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    out[0] = sum / std::sqrt(2.0 * kPi * z);
  }
  // Backward recurrence for r_n = I_n / I_{n-1}.
  const int start = 2 * std::max(n_max, static_cast<int>(std::ceil(z))) + 50;
  std::vector<double> ratio(static_cast<std::size_t>(n_max) + 1, 0.0);
  double r = 0.0;
  for (int n = start; n >= 1; --n) {
    r = 1.0 / (2.0 * n / z + r);
    if (n <= n_max) ratio[static_cast<std::size_t>(n)] = r;
  }
  for (int n = 1; n <= n_max; ++n)
    out[static_cast<std::size_t>(n)] = out[static_cast<std::size_t>(n) - 1] * ratio[static_cast<std::size_t>(n)];
  return out;
}

std::vector<double> lattice_heat_kernel(double h, double s, int n_max) {
  if (!(h > 0.0) || !(s > 0.0)) throw DomainError("lattice_heat_kernel: h and s must be positive");
  std::vector<double> out = scaled_bessel_i(2.0 * s / (h * h), n_max);
  for (double& v : out) v /= h;
  return out;
}

std::vector<GaussianReport> gaussian_domination(const MatrixXd& A, const VectorXd& weights, const Mesh& mesh,
                                                BoundaryCondition bc, const std::vector<double>& s_list,
                                                const GaussianParams& params) {
  const std::vector<int>& dofs = dof_nodes(mesh, bc);
  const auto n = static_cast<Eigen::Index>(dofs.size());
  if (A.rows() != n || weights.size() != n) throw DomainError("gaussian_domination: size mismatch");
  const int N = mesh.dim;
  int max_offset = 0;
  for (const auto& c : mesh.coords) max_offset = std::max(max_offset, std::max(std::abs(c[0]), std::abs(c[1])));
  max_offset = 2 * max_offset + 2;

  std::vector<GaussianReport> out;
  for (double s : s_list) {
    if (!(s > 0.0)) throw DomainError("gaussian_domination: s must be positive");
    const MatrixXd E = mat_exp(A, s);
    MatrixXd k(n, n);
    for (Eigen::Index j = 0; j < n; ++j) k.col(j) = E.col(j) / weights(j);
    const double kmax = k.cwiseAbs().maxCoeff();
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * kmax;
    std::vector<double> lat;
    if (params.envelope == Envelope::lattice) lat = lattice_heat_kernel(mesh.h, params.beta * s, max_offset);
    const double lat_scale = params.C * std::pow(4.0 * kPi * params.beta, 0.5 * N) * std::exp(params.omega1 * s);

    GaussianReport rep;
    rep.s = s;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& ci = mesh.coords[static_cast<std::size_t>(dofs[static_cast<std::size_t>(i)])];
      const Point& xi = mesh.nodes[static_cast<std::size_t>(dofs[static_cast<std::size_t>(i)])];
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto& cj = mesh.coords[static_cast<std::size_t>(dofs[static_cast<std::size_t>(j)])];
        const Point& xj = mesh.nodes[static_cast<std::size_t>(dofs[static_cast<std::size_t>(j)])];
        const double d2 = N == 1 ? std::pow(xi(0) - xj(0), 2) : (xi - xj).squaredNorm();
        const double analytic = gaussian_envelope(params, N, d2, s);
        double env = analytic;
        if (params.envelope == Envelope::lattice) {
          env = lat_scale * lat[static_cast<std::size_t>(std::abs(ci[0] - cj[0]))];
          if (N == 2) env *= lat[static_cast<std::size_t>(std::abs(ci[1] - cj[1]))];
        }
        const double kij = std::abs(k(i, j));
        const double ratio = env > 0.0 ? kij / env : (kij > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        if (ratio > 1.0 + params.tolerance && kij <= floor) {
          ++rep.unresolved;
          continue;
        }
        if (ratio > rep.max_ratio) {
          rep.max_ratio = ratio;
          rep.witness_i = static_cast<int>(i);
          rep.witness_j = static_cast<int>(j);
        }
        if (analytic > 0.0) rep.continuum_ratio = std::max(rep.continuum_ratio, kij / analytic);
      }
    }
    rep.pass = rep.max_ratio <= 1.0 + params.tolerance;
    out.push_back(rep);
  }
  return out;
}

std::vector<GaussianReport> gaussian_domination(const OperatorFamily& family, const Mesh& mesh,
                                                const std::vector<double>& s_list, const GaussianParams& params,
                                                int time_index) {
  if (time_index < 0 || time_index >= family.nodes()) throw DomainError("gaussian_domination: bad time index");
  return gaussian_domination(family.matrices[static_cast<std::size_t>(time_index)], family.weights, mesh, family.bc,
                             s_list, params);
}

}  // namespace mrlab
