#include <doctest.h>

#include "mrlab/field_models.hpp"

using namespace mrlab;

namespace {

std::vector<CoefficientField> builtin_fields() {
  HolderBlendParams hp;
  CheckerboardParams cp;
  cp.mollify_width = 0.02;
  cp.amplitude = 0.3;
  RobinParams rp;
  DriftParams dp;
  dp.amplitude = 0.4;
  return {identity_field(1, DomainKind::interval),
          identity_field(2, DomainKind::square),
          constant_field(2, DomainKind::square, (Tensor() << 2.0, 0.5, 0.5, 1.0).finished()),
          holder_blend(1, DomainKind::interval, hp),
          holder_blend(2, DomainKind::square, hp),
          meyers_field(),
          checkerboard_field(cp),
          robin_field(1, DomainKind::interval, rp),
          drift_field(2, DomainKind::square, dp)};
}

}  // namespace

TEST_SUITE("field_models") {
  TEST_CASE("Meyers coefficients at (1, 0)") {
    const MatrixXd A = eval_matrix(meyers_field(), 0.0, Point(1.0, 0.0));
    CHECK(A(0, 0) == doctest::Approx(1.0));
    CHECK(A(0, 1) == doctest::Approx(0.0));
    CHECK(A(1, 0) == doctest::Approx(0.0));
    CHECK(A(1, 1) == doctest::Approx(0.25));
  }

  TEST_CASE("Meyers coefficients match the closed form off the axes") {
    const Point x(0.3, -0.4);
    const double r2 = x.squaredNorm();
    const MatrixXd A = eval_matrix(meyers_field(), 0.7, x);
    CHECK(A(0, 0) == doctest::Approx((4 * x[0] * x[0] + x[1] * x[1]) / (4 * r2)));
    CHECK(A(0, 1) == doctest::Approx(4 * x[0] * x[1] / (4 * r2)));
    CHECK(A(1, 1) == doctest::Approx((x[0] * x[0] + 4 * x[1] * x[1]) / (4 * r2)));
  }

  TEST_CASE("identity field evaluates to the identity") {
    for (double t : {0.0, 0.4, 1.0}) {
      CHECK(eval_matrix(identity_field(2, DomainKind::square), t, Point(0.2, 0.7)).isApprox(MatrixXd::Identity(2, 2)));
      CHECK(eval_matrix(identity_field(1, DomainKind::interval), t, Point(0.2, 0.0)).isApprox(MatrixXd::Identity(1, 1)));
    }
  }

  TEST_CASE("Hölder blend reduces to its base at the anchor time") {
    HolderBlendParams hp;
    hp.t0 = 0.3;
    const CoefficientField f = holder_blend(2, DomainKind::square, hp);
    HolderBlendParams flat = hp;
    flat.amplitude = 0.0;
    const CoefficientField base = holder_blend(2, DomainKind::square, flat);
    const Point x(0.25, 0.6);
    CHECK((eval_matrix(f, 0.3, x) - eval_matrix(base, 0.9, x)).norm() < 1e-15);
    CHECK((eval_matrix(f, 0.9, x) - eval_matrix(base, 0.9, x)).norm() > 1e-3);
  }

  TEST_CASE("ellipticity and sup bounds hold on samples of every built-in field") {
    Rng rng(3);
    for (const CoefficientField& f : builtin_fields()) {
      CAPTURE(f.name);
      for (int k = 0; k < 400; ++k) {
        const double t = rng.uniform();
        Point x(rng.uniform(), f.dim == 2 ? rng.uniform() : 0.0);
        if (f.domain == DomainKind::disk) x = Point(rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7));
        if (f.singular_at && f.singular_at(x)) continue;
        const Tensor a = f.leading(t, x);
        CHECK(min_symmetric_eigenvalue(a, f.dim) >= f.alpha0 - 1e-12);
        CHECK(a.topLeftCorner(f.dim, f.dim).cwiseAbs().maxCoeff() <= f.sup_bound + 1e-12);
        if (f.zero_order) CHECK(std::abs(f.zero_order(t, x)) <= f.sup_bound + 1e-12);
        if (f.has_robin()) CHECK(f.robin_beta(t, x) >= 0.0);
      }
    }
  }

  TEST_CASE("constant field has zero oscillation") {
    const VmoProfile prof = vmo_modulus(identity_field(2, DomainKind::square), 0.0, {0.05, 0.1, 0.2});
    for (double e : prof.eta) CHECK(e == 0.0);
  }

  TEST_CASE("sharp checkerboard has positive oscillation at r = 1/4") {
    CheckerboardParams cp;
    cp.cell = 0.125;
    cp.low = 0.25;
    cp.high = 1.0;
    VmoOptions vo;
    vo.sample_density = 256;
    const VmoProfile prof = vmo_modulus(checkerboard_field(cp), 0.0, {0.25}, vo);
    // Independent oracle: mean oscillation of a two-valued pattern over a square
    // covering many cells is close to (high - low) / 2.
    CHECK(prof.eta[0] > 0.3);
    CHECK(prof.eta[0] < 0.375 + 1e-9);
  }

  TEST_CASE("vmo modulus is nonnegative and nondecreasing") {
    CheckerboardParams cp;
    cp.mollify_width = 0.03;
    for (const CoefficientField& f : {checkerboard_field(cp), holder_blend(2, DomainKind::square, {})}) {
      const VmoProfile prof = vmo_modulus(f, 0.5, {0.02, 0.04, 0.08, 0.16, 0.32});
      for (std::size_t k = 0; k < prof.eta.size(); ++k) {
        CHECK(prof.eta[k] >= 0.0);
        if (k) CHECK(prof.eta[k] >= prof.eta[k - 1]);
      }
    }
  }

  TEST_CASE("Meyers field on an annulus has vanishing small-scale oscillation") {
    VmoOptions vo;
    vo.sample_density = 512;
    vo.region = [](const Point& x) { return x.norm() > 0.1 && x.norm() < 1.0; };
    const VmoProfile prof = vmo_modulus(meyers_field(), 0.0, {0.01, 0.02, 0.04, 0.08}, vo);
    for (std::size_t k = 1; k < prof.eta.size(); ++k) CHECK(prof.eta[k - 1] < prof.eta[k]);
    CHECK(prof.eta.front() < 0.25 * prof.eta.back());
  }

  TEST_CASE("mollification lowers the small-scale oscillation of the checkerboard") {
    CheckerboardParams sharp;
    CheckerboardParams smooth = sharp;
    smooth.mollify_width = 0.05;
    const double r = 1.0 / 64.0;
    const double eta_sharp = vmo_modulus(checkerboard_field(sharp), 0.0, {r}).eta[0];
    const double eta_smooth = vmo_modulus(checkerboard_field(smooth), 0.0, {r}).eta[0];
    CHECK(eta_smooth < 0.5 * eta_sharp);
  }

  TEST_CASE("time Hölder fit recovers the blend exponent") {
    std::vector<double> times;
    for (int k = 0; k <= 32; ++k) times.push_back(k / 32.0);
    for (double beta : {0.6, 0.75, 0.9}) {
      HolderBlendParams hp;
      hp.beta_time = beta;
      const HolderFitResult fit = time_holder_fit(holder_blend(2, DomainKind::square, hp), times);
      CAPTURE(beta);
      CHECK(!fit.constant_in_time);
      CHECK(fit.exponent == doctest::Approx(beta).epsilon(0.05 / beta));
      CHECK(fit.r2 >= 0.98);
    }
  }

  TEST_CASE("time Hölder fit: linear blend and constant field") {
    std::vector<double> times;
    for (int k = 0; k <= 20; ++k) times.push_back(k / 20.0);
    HolderBlendParams hp;
    hp.beta_time = 1.0;
    const HolderFitResult lin = time_holder_fit(holder_blend(1, DomainKind::interval, hp), times);
    CHECK(lin.exponent >= 0.95);
    CHECK(lin.exponent <= 1.05);
    CHECK(time_holder_fit(identity_field(2, DomainKind::square), times).constant_in_time);
  }

  TEST_CASE("time Hölder fit rejects too few samples") {
    CHECK_THROWS_AS(time_holder_fit(identity_field(1, DomainKind::interval), {0.0}), DomainError);
    CHECK_THROWS_AS(time_holder_fit(identity_field(1, DomainKind::interval), {0.0, 0.5, 1.0}), DomainError);
  }

  TEST_CASE("domain names round-trip") {
    for (DomainKind k : {DomainKind::interval, DomainKind::square, DomainKind::disk})
      CHECK(domain_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(domain_from_string("torus"), DomainError);
  }
}
