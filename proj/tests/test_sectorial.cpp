#include <doctest.h>

#include <algorithm>

#include "mrlab/sectorial.hpp"

using namespace mrlab;

namespace {

MatrixXd random_spd(Rng& rng, int n) {
  MatrixXd G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = rng.normal();
  return G * G.transpose() / n + MatrixXd::Identity(n, n);
}

// SPD plus a skew part small enough to keep the numerical range in the right half-plane.
MatrixXd random_sectorial(Rng& rng, int n) {
  MatrixXd S(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) S(i, j) = rng.normal();
  S = 0.3 * (S - S.transpose()) / std::sqrt(static_cast<double>(n));
  return random_spd(rng, n) + S;
}

// A^{-1/2} = (2/pi) int_0^{pi/2} (tan^2 u + A)^{-1} sec^2 u du, composite Simpson.
MatrixXd inverse_sqrt_by_quadrature(const MatrixXd& A, int panels) {
  const Eigen::Index n = A.rows();
  const MatrixXd I = MatrixXd::Identity(n, n);
  const double a = 0.0, b = kPi / 2.0;
  const double h = (b - a) / panels;
  MatrixXd sum = MatrixXd::Zero(n, n);
  for (int k = 0; k <= panels; ++k) {
    const double u = a + k * h;
    MatrixXd val;
    if (k == panels) {
      val = I;  // limit as u -> pi/2
    } else {
      const double tn = std::tan(u);
      const double sec2 = 1.0 + tn * tn;
      val = (tn * tn * I + A).partialPivLu().inverse() * sec2;
    }
    const double wgt = (k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    sum += wgt * val;
  }
  return (2.0 / kPi) * (h / 3.0) * sum;
}

}  // namespace

TEST_SUITE("sectorial") {
  TEST_CASE("spectrum of small matrices") {
    auto sorted_real = [](const MatrixXd& A) {
      std::vector<double> v;
      for (const Complex& z : spectrum(A)) {
        CHECK(std::abs(z.imag()) < 1e-12);
        v.push_back(z.real());
      }
      std::sort(v.begin(), v.end());
      return v;
    };
    for (double e : sorted_real(MatrixXd::Identity(3, 3))) CHECK(e == doctest::Approx(1.0));
    const auto d = sorted_real(Eigen::Vector2d(4.0, 1.0).asDiagonal());
    CHECK(d[0] == doctest::Approx(1.0));
    CHECK(d[1] == doctest::Approx(4.0));

    const Mesh m = build_mesh(DomainKind::interval, 0.25);
    const MatrixXd L = MatrixXd(assemble_operator(m, identity_field(1, DomainKind::interval),
                                                  BoundaryCondition::dirichlet, 0.0));
    const auto ev = sorted_real(L);
    REQUIRE(ev.size() == 3);
    for (int k = 1; k <= 3; ++k) CHECK(ev[k - 1] == doctest::Approx(32.0 * (1.0 - std::cos(k * kPi / 4.0))));
    CHECK(ev[0] == doctest::Approx(9.37).epsilon(1e-3));
    CHECK(ev[2] == doctest::Approx(54.6).epsilon(1e-3));
  }

  TEST_CASE("resolvent examples") {
    CHECK(resolvent(MatrixXd::Constant(1, 1, 1.0), -1.0)(0, 0).real() == doctest::Approx(-0.5));
    const MatrixXcd D = resolvent(Eigen::Vector2d(1.0, 2.0).asDiagonal().toDenseMatrix(), 0.0);
    CHECK(D(0, 0).real() == doctest::Approx(-1.0));
    CHECK(D(1, 1).real() == doctest::Approx(-0.5));
    CHECK(std::abs(D(0, 1)) == 0.0);

    MatrixXd J(2, 2);
    J << 2, 1, 0, 2;
    MatrixXd expected(2, 2);
    expected << -0.5, 0.25, 0.0, -0.5;
    CHECK((resolvent(J, 0.0) - expected.cast<Complex>()).norm() < 1e-14);
    CHECK_THROWS_AS(resolvent(J, 2.0), SingularityError);
  }

  TEST_CASE("sector constant of the identity is one") {
    const SectorReport r = sector_verify(MatrixXd::Identity(3, 3), WeightedSpace::uniform(3), kPi / 2.0);
    CHECK(r.samples > 0);
    CHECK(r.constant.upper <= 1.0 + 1e-12);
    CHECK(r.constant.upper >= 0.99);
  }

  TEST_CASE("scalar sector constant matches a dense scan of the rays") {
    LambdaGrid grid;
    grid.ray_angles = {3.0 * kPi / 4.0};
    grid.include_negative_axis = false;
    const SectorReport r = sector_verify(MatrixXd::Constant(1, 1, 1.0), WeightedSpace::uniform(1), kPi / 4.0, grid);
    double dense = 0.0;
    const double lo = std::log10(grid.min_factor), hi = std::log10(grid.max_factor);
    for (int k = 0; k <= 100000; ++k) {
      const double rad = std::pow(10.0, lo + (hi - lo) * k / 100000.0);
      const Complex lam = std::polar(rad, 3.0 * kPi / 4.0);
      dense = std::max(dense, std::abs(lam) / std::abs(lam - 1.0));
    }
    CHECK(r.constant.upper <= dense + 1e-12);
    CHECK(r.constant.upper >= dense - 1e-3);
  }

  TEST_CASE("spectrum outside the sector is rejected") {
    const double th = kPi / 3.0;
    MatrixXd R(2, 2);
    R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    CHECK_THROWS_AS(sector_verify(2.0 * R, WeightedSpace::uniform(2), kPi / 4.0), NotSectorialError);
  }

  TEST_CASE("sector constant stays above 0.9 for nonzero sectorial matrices") {
    Rng rng(11);
    for (int k = 0; k < 4; ++k) {
      const MatrixXd A = random_sectorial(rng, 6);
      CHECK(sector_verify(A, WeightedSpace::uniform(6), 0.45 * kPi).constant.upper >= 0.9);
    }
  }

  TEST_CASE("matrix exponential examples") {
    const MatrixXd E = mat_exp(MatrixXd(Eigen::Vector2d(1.0, 2.0).asDiagonal()), 1.0);
    CHECK(E(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(E(1, 1) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
    CHECK(E(0, 1) == 0.0);

    Rng rng(5);
    const MatrixXd A = random_sectorial(rng, 5);
    CHECK(mat_exp(A, 0.0).isApprox(MatrixXd::Identity(5, 5)));

    MatrixXd N(2, 2);
    N << 0, 1, 0, 0;
    MatrixXd expect(2, 2);
    expect << 1, -1, 0, 1;
    CHECK((mat_exp(N, 1.0) - expect).norm() < 1e-14);
  }

  TEST_CASE("semigroup law") {
    Rng rng(17);
    for (int k = 0; k < 4; ++k) {
      const MatrixXd A = k % 2 ? random_spd(rng, 8) : random_sectorial(rng, 8);
      const double s = rng.uniform(0.0, 2.0), r = rng.uniform(0.0, 2.0);
      const MatrixXd lhs = mat_exp(A, s) * mat_exp(A, r);
      CHECK((lhs - mat_exp(A, s + r)).norm() <= 1e-10 * std::max(1.0, lhs.norm()));
    }
  }

  TEST_CASE("fractional power examples") {
    const MatrixXcd P = frac_power(MatrixXd(Eigen::Vector2d(1.0, 4.0).asDiagonal()), 0.5).value;
    CHECK(std::abs(P(0, 0) - 1.0) < 1e-14);
    CHECK(std::abs(P(1, 1) - 2.0) < 1e-14);
    CHECK(std::abs(P(0, 1)) < 1e-14);

    Rng rng(23);
    const MatrixXd A = random_sectorial(rng, 6);
    CHECK((frac_power(A, 0.0).value - MatrixXcd::Identity(6, 6)).norm() < 1e-12);

    const MatrixXcd ei = frac_power(MatrixXd::Constant(1, 1, std::exp(1.0)), Complex(0.0, 1.0)).value;
    CHECK(std::abs(ei(0, 0) - std::exp(Complex(0.0, 1.0))) < 1e-14);
    CHECK(std::abs(ei(0, 0)) == doctest::Approx(1.0));

    CHECK_THROWS_AS(frac_power(MatrixXd::Constant(1, 1, -2.0), 0.5), BranchError);
  }

  TEST_CASE("fractional power group law") {
    Rng rng(29);
    for (int n : {4, 16, 64}) {
      for (int kind = 0; kind < 2; ++kind) {
        const MatrixXd A = kind ? random_sectorial(rng, n) : random_spd(rng, n);
        const MatrixXcd a = frac_power(A, 0.3).value, b = frac_power(A, 0.4).value, c = frac_power(A, 0.7).value;
        CAPTURE(n);
        CHECK((a * b - c).norm() <= 1e-8 * c.norm());
      }
    }
  }

  TEST_CASE("inverse square root agrees with contour quadrature") {
    Rng rng(31);
    for (int kind = 0; kind < 2; ++kind) {
      const MatrixXd A = kind ? random_sectorial(rng, 5) : random_spd(rng, 5);
      const MatrixXd oracle = inverse_sqrt_by_quadrature(A, 20000);
      const MatrixXcd P = frac_power(A, -0.5).value;
      CHECK(P.imag().norm() < 1e-10);
      CHECK((P.real() - oracle).norm() <= 1e-7 * oracle.norm());
    }
  }

  TEST_CASE("weighted adjoint") {
    MatrixXd A(2, 2);
    A << 1, 2, 3, 4;
    MatrixXd expect(2, 2);
    expect << 1, 6, 1, 4;
    CHECK((adjoint(A, WeightedSpace{Eigen::Vector2d(1.0, 2.0), 2.0}) - expect).norm() == 0.0);
    CHECK(adjoint(A, WeightedSpace::uniform(2)) == A.transpose());
    const MatrixXd S = A + A.transpose();
    CHECK(adjoint(S, WeightedSpace::uniform(2)) == S);
  }

  TEST_CASE("pairing identity for the weighted adjoint") {
    Rng rng(37);
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 7;
      WeightedSpace sp{VectorXd(n), 3.0};
      VectorXd u(n), v(n);
      MatrixXd A(n, n);
      for (int i = 0; i < n; ++i) {
        sp.weights(i) = rng.uniform(0.1, 2.0);
        u(i) = rng.normal();
        v(i) = rng.normal();
        for (int j = 0; j < n; ++j) A(i, j) = rng.normal();
      }
      const double lhs = pairing<double>(sp, A * u, v);
      const double rhs = pairing<double>(sp, u, adjoint(A, sp) * v);
      CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
    }
  }

  TEST_CASE("scale norms") {
    const MatrixXd A = Eigen::Vector2d(1.0, 4.0).asDiagonal();
    CHECK(scale_norm(A, WeightedSpace::uniform(2), 0.5, Eigen::Vector2d(0.0, 1.0)) == doctest::Approx(2.0));
    CHECK(scale_norm(A, WeightedSpace::uniform(2), -1.0, Eigen::Vector2d(0.0, 1.0)) == doctest::Approx(0.25));
    const VectorXd x = Eigen::Vector2d(3.0, -4.0);
    CHECK(scale_norm(A, WeightedSpace::uniform(2), 0.0, x) == doctest::Approx(5.0));
  }

  TEST_CASE("K-functional examples") {
    const VectorXd e = Eigen::Vector2d(0.6, 0.8);
    CHECK(quasi_k_functional(MatrixXd::Identity(2, 2), WeightedSpace::uniform(2), e, 1.0) ==
          doctest::Approx(1.0).epsilon(1e-14));
    const MatrixXd A = Eigen::Vector2d(1.0, 100.0).asDiagonal();
    CHECK(quasi_k_functional(A, WeightedSpace::uniform(2), Eigen::Vector2d(0.0, 1.0), 1.0) <= 1.0 + 1e-14);
  }

  TEST_CASE("K-functional is nondecreasing and concave on dyadic t, tends to zero") {
    Rng rng(41);
    const MatrixXd A = random_spd(rng, 6) * 10.0;
    VectorXd x(6);
    for (int i = 0; i < 6; ++i) x(i) = rng.normal();
    const KFunctional K(A, WeightedSpace::uniform(6), x);
    double prev = 0.0;
    std::vector<double> t, k;
    for (int j = -30; j <= 10; ++j) {
      t.push_back(std::ldexp(1.0, j));
      k.push_back(K(t.back()));
      CHECK(k.back() >= prev - 1e-14);
      prev = k.back();
    }
    // Concavity on the sampled points: slopes do not increase beyond quasi-minimizer slack.
    for (std::size_t i = 2; i < t.size(); ++i) {
      const double s1 = (k[i - 1] - k[i - 2]) / (t[i - 1] - t[i - 2]);
      const double s2 = (k[i] - k[i - 1]) / (t[i] - t[i - 1]);
      CHECK(s2 <= s1 * (1.0 + 1e-9) + 1e-12);
    }
    CHECK(k.front() < 1e-6 * x.norm());
  }

  TEST_CASE("real interpolation norm of the identity follows the series") {
    const double theta = 0.5, q = 2.0;
    double series = 0.0;
    for (int j = -20; j <= 20; ++j)
      series += std::pow(std::pow(2.0, -j * theta) * std::min(1.0, std::pow(2.0, j)), q);
    series = std::pow(series, 1.0 / q);
    const VectorXd x = Eigen::Vector3d(1.0, -2.0, 0.5);
    const WeightedSpace sp = WeightedSpace::uniform(3);
    const double v = real_interp_norm(MatrixXd::Identity(3, 3), sp, theta, q, x);
    CHECK(v == doctest::Approx(series * x.norm()).epsilon(1e-12));
    CHECK(series == doctest::Approx(std::sqrt(3.0)).epsilon(1e-5));
    CHECK(real_interp_norm(MatrixXd::Identity(3, 3), sp, theta, q, VectorXd::Zero(3)) == 0.0);
    CHECK(real_interp_norm(MatrixXd::Identity(3, 3), sp, theta, q, 2.0 * x) == doctest::Approx(2.0 * v).epsilon(1e-14));
  }

  TEST_CASE("imaginary powers of SPD matrices are unitary in l^2") {
    Rng rng(43);
    std::vector<double> s;
    for (int k = -10; k <= 10; ++k) s.push_back(0.5 * k);
    for (int n : {3, 12, 40}) {
      const BipFit fit = bip_fit(random_spd(rng, n) * 50.0, WeightedSpace::uniform(n), s);
      CHECK(fit.max_unitarity_defect <= 1e-8);
    }
  }

  TEST_CASE("interpolated resolvent bound is finite") {
    Rng rng(47);
    const MatrixXd A = random_spd(rng, 8);
    for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const double b = interpolated_resolvent_bound(A, WeightedSpace::uniform(8), alpha, 3.0 * kPi / 4.0, 1e-3, 1e3, 60);
      CHECK(std::isfinite(b));
      CHECK(b > 0.0);
    }
  }

  TEST_CASE("induced norms are exact at p = 1, 2, inf and bracketed otherwise") {
    Rng rng(53);
    MatrixXd M(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) M(i, j) = rng.normal();
    const NormBounds n1 = induced_norm<double>(M, WeightedSpace::uniform(4, 1.0));
    CHECK(n1.exact());
    CHECK(n1.upper == doctest::Approx(M.cwiseAbs().colwise().sum().maxCoeff()));
    const NormBounds n2 = induced_norm<double>(M, WeightedSpace::uniform(4, 2.0));
    CHECK(n2.upper == doctest::Approx(M.jacobiSvd().singularValues()(0)));
    const NormBounds n3 = induced_norm<double>(M, WeightedSpace::uniform(4, 3.0));
    CHECK(n3.lower <= n3.upper * (1.0 + 1e-12));
    CHECK(n3.lower > 0.0);
  }
}
