#include "mrlab/sectorial.hpp"

#include <algorithm>
#include <array>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

namespace mrlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <typename Scalar>
double norm1(const Matrix<Scalar>& B) {
  return B.cwiseAbs().colwise().sum().maxCoeff();
}

template <typename Scalar>
double norm_inf(const Matrix<Scalar>& B) {
  return B.cwiseAbs().rowwise().sum().maxCoeff();
}

template <typename Scalar>
double norm2(const Matrix<Scalar>& B) {
  if (B.size() == 0) return 0.0;
  // Largest eigenvalue of the Gram matrix; much cheaper than a full SVD.
  const Matrix<Scalar> G = B.adjoint() * B;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(G, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

template <typename Scalar>
double plain_p_norm(const Vector<Scalar>& v, double p) {
  if (std::isinf(p)) return v.cwiseAbs().maxCoeff();
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v(i)) / scale, p);
  return scale * std::pow(s, 1.0 / p);
}

// Normalized duality map: the unit vector in l^{p'} norming y in l^p.
template <typename Scalar>
Vector<Scalar> duality_map(const Vector<Scalar>& y, double p) {
  const double ny = plain_p_norm(y, p);
  Vector<Scalar> out = Vector<Scalar>::Zero(y.size());
  if (ny == 0.0) return out;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double a = std::abs(y(i));
    if (a == 0.0) continue;
    out(i) = (y(i) / a) * std::pow(a / ny, p - 1.0);
  }
  return out;
}

double conj_exp(double p) {
  if (std::isinf(p)) return 1.0;
  if (p == 1.0) return kInf;
  return p / (p - 1.0);
}

// ||B||_p <= ||B||_{p0}^{1-t} ||B||_{p1}^t with 1/p = (1-t)/p0 + t/p1.
double riesz_thorin(double p, double p0, double n0, double p1, double n1) {
  const double r = 1.0 / p, r0 = 1.0 / p0, r1 = std::isinf(p1) ? 0.0 : 1.0 / p1;
  const double t = (r0 - r) / (r0 - r1);
  return std::pow(n0, 1.0 - t) * std::pow(n1, t);
}

}  // namespace

double WeightedSpace::conjugate_exponent() const { return conj_exp(p); }

template <typename Scalar>
std::pair<double, Vector<Scalar>> boyd_power_iteration(const Matrix<Scalar>& B, double p,
                                                       const PowerIterationOptions& opts) {
  const Eigen::Index n = B.cols();
  const double pc = conj_exp(p);
  Rng rng(opts.seed);
  double best = 0.0;
  Vector<Scalar> best_x = Vector<Scalar>::Zero(n);
  if (n == 0) return {0.0, best_x};

  auto run = [&](Vector<Scalar> x) {
    x /= plain_p_norm(x, p);
    double prev = -1.0;
    for (int it = 0; it < opts.max_iterations; ++it) {
      const Vector<Scalar> y = B * x;
      const double val = plain_p_norm(y, p);
      if (val > best) {
        best = val;
        best_x = x;
      }
      if (val == 0.0 || std::abs(val - prev) <= 1e-13 * val) break;
      prev = val;
      const Vector<Scalar> z = B.adjoint() * duality_map(y, p);
      if (z.cwiseAbs().maxCoeff() == 0.0) break;
      x = duality_map(z, pc);
    }
  };

  // Best column as a first start; then the all-ones vector; then random starts.
  Eigen::Index col = 0;
  double col_best = -1.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double v = plain_p_norm(Vector<Scalar>(B.col(j)), p);
    if (v > col_best) {
      col_best = v;
      col = j;
    }
  }
  run(Vector<Scalar>::Unit(n, col));
  run(Vector<Scalar>::Ones(n));
  for (int r = 0; r < opts.restarts; ++r) {
    Vector<Scalar> x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = Scalar(rng.normal());
    if (plain_p_norm(x, p) == 0.0) continue;
    run(x);
  }
  return {best, best_x};
}

template <typename Scalar>
NormBounds induced_norm(const Matrix<Scalar>& M, const WeightedSpace& space, const PowerIterationOptions& opts) {
  if (M.rows() != space.size() || M.cols() != space.size()) throw DomainError("induced_norm: size mismatch");
  if (!(space.p >= 1.0)) throw DomainError("induced_norm: exponent must be >= 1");
  if (!M.allFinite()) throw OverflowError("induced_norm: non-finite matrix entries");
  const double p = space.p;
  if (std::isinf(p)) {
    const double v = norm_inf(M);
    return {v, v};
  }
  // Conjugate by D = diag(w^{1/p}) to reduce to the unweighted l^p norm.
  const Eigen::Index n = M.rows();
  VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = std::pow(space.weights(i), 1.0 / p);
  Matrix<Scalar> B(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) B(i, j) = M(i, j) * (d(i) / d(j));
  if (p == 1.0) {
    const double v = norm1(B);
    return {v, v};
  }
  if (p == 2.0) {
    const double v = norm2(B);
    return {v, v};
  }
  const double n1 = norm1(B), n2 = norm2(B), ni = norm_inf(B);
  double upper = riesz_thorin(p, 1.0, n1, kInf, ni);
  if (p < 2.0)
    upper = std::min(upper, riesz_thorin(p, 1.0, n1, 2.0, n2));
  else
    upper = std::min(upper, riesz_thorin(p, 2.0, n2, kInf, ni));
  double lower = 0.0;
  if (opts.restarts < 0) {
    for (Eigen::Index j = 0; j < n; ++j) lower = std::max(lower, plain_p_norm(Vector<Scalar>(B.col(j)), p));
  } else {
    lower = boyd_power_iteration(B, p, opts).first;
  }
  lower = std::min(lower, upper);
  return {lower, upper};
}

template NormBounds induced_norm<double>(const MatrixXd&, const WeightedSpace&, const PowerIterationOptions&);
template NormBounds induced_norm<Complex>(const MatrixXcd&, const WeightedSpace&, const PowerIterationOptions&);
template std::pair<double, VectorXd> boyd_power_iteration<double>(const MatrixXd&, double,
                                                                  const PowerIterationOptions&);
template std::pair<double, VectorXcd> boyd_power_iteration<Complex>(const MatrixXcd&, double,
                                                                    const PowerIterationOptions&);

std::vector<Complex> spectrum(const MatrixXd& A) {
  if (A.rows() != A.cols()) throw DomainError("spectrum: matrix must be square");
  if (!A.allFinite()) throw DomainError("spectrum: non-finite entries");
  if (A.size() == 0) return {};
  Eigen::EigenSolver<MatrixXd> es(A, false);
  if (es.info() != Eigen::Success) throw ConvergenceError("spectrum: eigensolver did not converge");
  std::vector<Complex> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  return out;
}

double spectral_radius(const MatrixXd& A) {
  double r = 0.0;
  for (const Complex& z : spectrum(A)) r = std::max(r, std::abs(z));
  return r;
}

MatrixXcd resolvent(const MatrixXd& A, Complex lambda, const std::vector<Complex>* eigenvalues) {
  if (A.rows() != A.cols()) throw DomainError("resolvent: matrix must be square");
  std::vector<Complex> local;
  if (!eigenvalues) {
    local = spectrum(A);
    eigenvalues = &local;
  }
  const double scale = std::max(norm1(A), std::numeric_limits<double>::min());
  for (const Complex& z : *eigenvalues)
    if (std::abs(lambda - z) < 1e-10 * scale) throw SingularityError("resolvent: lambda too close to the spectrum");
  const Eigen::Index n = A.rows();
  MatrixXcd shifted = -A.cast<Complex>();
  shifted.diagonal().array() += lambda;
  Eigen::PartialPivLU<MatrixXcd> lu(shifted);
  return lu.solve(MatrixXcd::Identity(n, n));
}

double distance_to_sector_complement(Complex z, double phi) {
  const double r = std::abs(z);
  if (r == 0.0) return 0.0;
  const double theta = std::abs(std::arg(z));
  if (theta >= phi) return 0.0;
  const double gap = phi - theta;
  return gap >= kPi / 2 ? r : r * std::sin(gap);
}

std::vector<Complex> lambda_samples(const LambdaGrid& grid, double phi, double min_modulus, double max_modulus) {
  if (!(min_modulus > 0.0) || !(max_modulus >= min_modulus)) throw DomainError("lambda_samples: bad spectral extremes");
  std::vector<double> angles = grid.ray_angles;
  if (angles.empty()) angles.push_back(std::min(phi + grid.angle_offset, kPi));
  if (grid.include_negative_axis) angles.push_back(kPi);
  const double lo = std::log10(grid.min_factor * min_modulus);
  const double hi = std::log10(grid.max_factor * max_modulus);
  const int count = std::max(2, static_cast<int>(std::ceil((hi - lo) * grid.per_decade)) + 1);
  std::vector<Complex> out;
  for (double a : angles) {
    if (a <= phi - 1e-15 || a > kPi + 1e-15) throw DomainError("lambda_samples: ray inside the sector");
    for (int k = 0; k < count; ++k) {
      const double r = std::pow(10.0, lo + (hi - lo) * k / (count - 1));
      out.push_back(std::polar(r, a));
      if (a < kPi) out.push_back(std::polar(r, -a));
    }
  }
  return out;
}

namespace {

void check_sector(const std::vector<Complex>& eig, double phi) {
  for (const Complex& z : eig)
    if (std::abs(z) == 0.0 || std::abs(std::arg(z)) >= phi)
      throw NotSectorialError("sector_verify: eigenvalue outside the open sector");
}

void accumulate(SectorReport& rep, const MatrixXd& A, const WeightedSpace& space, double phi, const LambdaGrid& grid) {
  const std::vector<Complex> eig = spectrum(A);
  check_sector(eig, phi);
  double lo = kInf, hi = 0.0;
  for (const Complex& z : eig) {
    lo = std::min(lo, std::abs(z));
    hi = std::max(hi, std::abs(z));
    rep.spectrum_margin = std::min(rep.spectrum_margin, distance_to_sector_complement(z, phi));
  }
  for (const Complex& lambda : lambda_samples(grid, phi, lo, hi)) {
    const NormBounds r = induced_norm(resolvent(A, lambda, &eig), space);
    const double m = std::abs(lambda);
    if (m * r.upper > rep.constant.upper) rep.witness = lambda;
    rep.constant.lower = std::max(rep.constant.lower, m * r.lower);
    rep.constant.upper = std::max(rep.constant.upper, m * r.upper);
    rep.constant_one_plus.lower = std::max(rep.constant_one_plus.lower, (1.0 + m) * r.lower);
    rep.constant_one_plus.upper = std::max(rep.constant_one_plus.upper, (1.0 + m) * r.upper);
    ++rep.samples;
  }
}

}  // namespace

SectorReport sector_verify(const MatrixXd& A, const WeightedSpace& space, double phi, const LambdaGrid& grid) {
  if (!(phi > 0.0 && phi < kPi)) throw DomainError("sector_verify: phi must lie in (0, pi)");
  SectorReport rep;
  rep.phi = phi;
  rep.spectrum_margin = kInf;
  accumulate(rep, A, space, phi, grid);
  return rep;
}

SectorReport sector_verify(const OperatorFamily& family, double phi, const LambdaGrid& grid) {
  if (!(phi > 0.0 && phi < kPi)) throw DomainError("sector_verify: phi must lie in (0, pi)");
  SectorReport rep;
  rep.phi = phi;
  rep.spectrum_margin = kInf;
  const WeightedSpace space{family.weights, family.p};
  for (const MatrixXd& A : family.matrices) accumulate(rep, A, space, phi, grid);
  return rep;
}

// --- matrix exponential ----------------------------------------------------

namespace {

constexpr std::array<double, 5> kTheta = {1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
                                          2.097847961257068e0, 5.371920351148152e0};

constexpr double kPade3[] = {120.0, 60.0, 12.0, 1.0};
constexpr double kPade5[] = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr double kPade7[] = {17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0};
constexpr double kPade9[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                             2162160.0,     110880.0,     3960.0,       90.0,        1.0};
constexpr double kPade13[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                              1187353796428800.0,  129060195264000.0,   10559470521600.0,
                              670442572800.0,      33522128640.0,       1323241920.0,
                              40840800.0,          960960.0,            16380.0,
                              182.0,               1.0};

template <typename Scalar>
Matrix<Scalar> pade_low(const Matrix<Scalar>& X, const double* b, int m) {
  const Eigen::Index n = X.rows();
  const Matrix<Scalar> I = Matrix<Scalar>::Identity(n, n);
  const Matrix<Scalar> X2 = X * X;
  Matrix<Scalar> power = I;
  Matrix<Scalar> U = b[1] * I;
  Matrix<Scalar> V = b[0] * I;
  for (int k = 2; k <= m; k += 2) {
    power = power * X2;
    V += b[k] * power;
    U += b[k + 1] * power;
  }
  U = X * U;
  return (V - U).partialPivLu().solve(V + U);
}

template <typename Scalar>
Matrix<Scalar> pade13(const Matrix<Scalar>& X) {
  const double* b = kPade13;
  const Eigen::Index n = X.rows();
  const Matrix<Scalar> I = Matrix<Scalar>::Identity(n, n);
  const Matrix<Scalar> X2 = X * X, X4 = X2 * X2, X6 = X4 * X2;
  Matrix<Scalar> U = X6 * (b[13] * X6 + b[11] * X4 + b[9] * X2);
  U += b[7] * X6 + b[5] * X4 + b[3] * X2 + b[1] * I;
  U = X * U;
  Matrix<Scalar> V = X6 * (b[12] * X6 + b[10] * X4 + b[8] * X2);
  V += b[6] * X6 + b[4] * X4 + b[2] * X2 + b[0] * I;
  return (V - U).partialPivLu().solve(V + U);
}

}  // namespace

template <typename Scalar>
Matrix<Scalar> mat_exp(const Matrix<Scalar>& A, double s) {
  if (A.rows() != A.cols()) throw DomainError("mat_exp: matrix must be square");
  if (!(s >= 0.0)) throw DomainError("mat_exp: time must be nonnegative");
  const Eigen::Index n = A.rows();
  if (s == 0.0 || n == 0) return Matrix<Scalar>::Identity(n, n);
  if (!A.allFinite()) throw OverflowError("mat_exp: non-finite entries");
  const Matrix<Scalar> X = -s * A;
  const double nx = norm1(X);
  if (!(nx <= kExpBudget)) throw OverflowError("mat_exp: s * ||A|| exceeds the exponential budget");
  if (nx <= kTheta[0]) return pade_low(X, kPade3, 3);
  if (nx <= kTheta[1]) return pade_low(X, kPade5, 5);
  if (nx <= kTheta[2]) return pade_low(X, kPade7, 7);
  if (nx <= kTheta[3]) return pade_low(X, kPade9, 9);
  const int squarings = std::max(0, static_cast<int>(std::ceil(std::log2(nx / kTheta[4]))));
  Matrix<Scalar> E = pade13<Scalar>(X / std::ldexp(1.0, squarings));
  for (int k = 0; k < squarings; ++k) E = E * E;
  if (!E.allFinite()) throw OverflowError("mat_exp: overflow during squaring");
  return E;
}

template MatrixXd mat_exp<double>(const MatrixXd&, double);
template MatrixXcd mat_exp<Complex>(const MatrixXcd&, double);

// --- complex powers --------------------------------------------------------

namespace {

// Eigen's matrixFunction wants a plain function pointer; the exponent travels
// in a thread-local slot.
thread_local Complex tl_exponent{0.0, 0.0};

Complex power_stem(Complex z, int k) {
  Complex coeff{1.0, 0.0};
  for (int j = 0; j < k; ++j) coeff *= tl_exponent - static_cast<double>(j);
  if (coeff == Complex{0.0, 0.0}) return coeff;
  return coeff * std::pow(z, tl_exponent - static_cast<double>(k));
}

}  // namespace

FracPowerResult frac_power(const MatrixXd& A, Complex theta) {
  if (A.rows() != A.cols()) throw DomainError("frac_power: matrix must be square");
  if (!(theta.real() >= -1.0 - 1e-12 && theta.real() <= 1.0 + 1e-12))
    throw DomainError("frac_power: Re theta must lie in [-1, 1]");
  const Eigen::Index n = A.rows();
  FracPowerResult out;
  if (n == 0) return out;
  const std::vector<Complex> eig = spectrum(A);
  double rho = 0.0;
  for (const Complex& z : eig) rho = std::max(rho, std::abs(z));
  for (const Complex& z : eig) {
    if (std::abs(z) <= 1e-14 * std::max(rho, 1.0)) throw BranchError("frac_power: zero eigenvalue");
    if (z.real() < 0.0 && std::abs(z.imag()) <= 1e-8 * std::abs(z))
      throw BranchError("frac_power: eigenvalue on the negative real axis");
  }
  if (theta == Complex{0.0, 0.0}) {
    out.value = MatrixXcd::Identity(n, n);
    return out;
  }
  if (theta == Complex{1.0, 0.0}) {
    out.value = A.cast<Complex>();
    return out;
  }
  if (theta == Complex{-1.0, 0.0}) {
    out.value = A.cast<Complex>().partialPivLu().inverse();
    return out;
  }
  const MatrixXcd Ac = A.cast<Complex>();
  tl_exponent = theta;
  out.value = Ac.matrixFunction(power_stem);

  // Clustered eigenvalues of a non-normal matrix make the blocked Taylor
  // evaluation ill-conditioned; flag rather than fail.
  double min_gap = kInf;
  for (std::size_t i = 0; i < eig.size(); ++i)
    for (std::size_t j = i + 1; j < eig.size(); ++j)
      if (eig[i] != eig[j]) min_gap = std::min(min_gap, std::abs(eig[i] - eig[j]));
  if (min_gap < 1e-6 * rho) {
    Eigen::ComplexSchur<MatrixXcd> schur(Ac);
    const MatrixXcd& T = schur.matrixT();
    const double off = T.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().norm();
    if (off > 1e-8 * T.norm())
      out.warning = "frac_power: clustered eigenvalues of a non-normal matrix; result may be ill-conditioned";
  }
  if (!out.value.allFinite()) throw OverflowError("frac_power: non-finite result");
  return out;
}

MatrixXd real_power(const MatrixXd& A, double theta) { return frac_power(A, Complex{theta, 0.0}).value.real(); }

double scale_norm(const MatrixXd& A, const WeightedSpace& space, double alpha, const VectorXd& x) {
  if (!(alpha >= -1.0 && alpha <= 1.0)) throw DomainError("scale_norm: alpha must lie in [-1, 1]");
  if (x.size() != A.rows() || x.size() != space.size()) throw DomainError("scale_norm: size mismatch");
  VectorXd y;
  if (alpha == 0.0)
    y = x;
  else if (alpha == 1.0)
    y = A * x;
  else if (alpha == -1.0)
    y = A.partialPivLu().solve(x);
  else
    y = real_power(A, alpha) * x;
  return lp_norm(space.weights, space.p, y);
}

// --- interpolation norms ---------------------------------------------------

KFunctional::KFunctional(const MatrixXd& A, const WeightedSpace& space, const VectorXd& x, int min_level,
                         int max_level) {
  if (x.size() != A.rows() || x.size() != space.size()) throw DomainError("KFunctional: size mismatch");
  if (min_level > max_level) throw DomainError("KFunctional: empty level range");
  const Eigen::Index n = A.rows();
  const double nx = lp_norm(space.weights, space.p, x);
  residual_.push_back(nx);  // s = 0
  graph_.push_back(0.0);
  for (int k = min_level; k <= max_level; ++k) {
    const double s = std::ldexp(1.0, k);
    MatrixXd M = A;
    M.diagonal().array() += s;
    const VectorXd z = s * M.partialPivLu().solve(x);
    residual_.push_back(lp_norm(space.weights, space.p, VectorXd(x - z)));
    graph_.push_back(lp_norm(space.weights, space.p, VectorXd(A * z)));
  }
  residual_.push_back(0.0);  // s = inf
  graph_.push_back(lp_norm(space.weights, space.p, VectorXd(A * x)));
  (void)n;
}

double KFunctional::operator()(double t) const {
  if (!(t >= 0.0)) throw DomainError("KFunctional: t must be nonnegative");
  double best = kInf;
  for (std::size_t k = 0; k < residual_.size(); ++k) best = std::min(best, residual_[k] + t * graph_[k]);
  return best;
}

double quasi_k_functional(const MatrixXd& A, const WeightedSpace& space, const VectorXd& x, double t, int min_level,
                          int max_level) {
  return KFunctional(A, space, x, min_level, max_level)(t);
}

double real_interp_norm(const MatrixXd& A, const WeightedSpace& space, double theta, double q, const VectorXd& x,
                        CoupleOrder order, int j_min, int j_max) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("real_interp_norm: theta must lie in (0, 1)");
  if (!(q >= 1.0)) throw DomainError("real_interp_norm: q must be >= 1");
  if (j_min > j_max) throw DomainError("real_interp_norm: empty level range");
  // The level range is widened so that every s = 1/t needed below is covered.
  const int reach = std::max(std::abs(j_min), std::abs(j_max)) + 30;
  const KFunctional K(A, space, x, -reach, reach);
  double acc = 0.0;
  double sup = 0.0;
  for (int j = j_min; j <= j_max; ++j) {
    const double t = std::ldexp(1.0, j);
    // (D(A), X) has K-functional t K(1/t) in terms of the (X, D(A)) one.
    const double k = order == CoupleOrder::space_first ? K(t) : t * K(1.0 / t);
    const double term = std::pow(t, -theta) * k;
    if (std::isinf(q))
      sup = std::max(sup, term);
    else
      acc += std::pow(term, q);
  }
  return std::isinf(q) ? sup : std::pow(acc, 1.0 / q);
}

double interpolated_resolvent_bound(const MatrixXd& A, const WeightedSpace& space, double alpha, double angle,
                                    double min_radius, double max_radius, int samples) {
  if (samples < 2 || !(min_radius > 0.0) || !(max_radius > min_radius))
    throw DomainError("interpolated_resolvent_bound: bad radius grid");
  const std::vector<Complex> eig = spectrum(A);
  const MatrixXcd Aa = frac_power(A, Complex{alpha, 0.0}).value;
  double best = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double r = min_radius * std::pow(max_radius / min_radius, static_cast<double>(k) / (samples - 1));
    const MatrixXcd M = Aa * resolvent(A, std::polar(r, angle), &eig);
    best = std::max(best, std::pow(r, 1.0 - alpha) * induced_norm(M, space).upper);
  }
  return best;
}

BipFit bip_fit(const MatrixXd& A, const WeightedSpace& space, const std::vector<double>& s_values) {
  if (s_values.empty()) throw DomainError("bip_fit: no s values");
  BipFit fit;
  fit.s_values = s_values;
  std::vector<double> xs, ys;
  for (double s : s_values) {
    const double v = induced_norm(frac_power(A, Complex{0.0, s}).value, space).upper;
    fit.norms.push_back(v);
    fit.max_unitarity_defect = std::max(fit.max_unitarity_defect, std::abs(v - 1.0));
    xs.push_back(std::abs(s));
    ys.push_back(std::log(v));
  }
  const bool spread = std::any_of(xs.begin(), xs.end(), [&](double v) { return v != xs.front(); });
  fit.omega = spread ? least_squares_line(xs, ys).slope : 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k)
    fit.M = std::max(fit.M, fit.norms[k] * std::exp(-fit.omega * xs[k]));
  return fit;
}

}  // namespace mrlab
