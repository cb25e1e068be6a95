#include <doctest.h>

#include "mrlab/at_verifier.hpp"

using namespace mrlab;

namespace {

OperatorFamily scalar_family(std::function<double(double)> a, int steps = 16) {
  return make_family(time_grid(1.0, steps), [a](double t) { return MatrixXd::Constant(1, 1, a(t)); },
                     VectorXd::Ones(1));
}

OperatorFamily blend_family(double beta, double h, int steps = 16) {
  HolderBlendParams hp;
  hp.beta_time = beta;
  const Mesh m = build_mesh(DomainKind::interval, h);
  return build_family(m, holder_blend(1, DomainKind::interval, hp), BoundaryCondition::dirichlet,
                      time_grid(1.0, steps), 2.0);
}

AtFitOptions anchored(double t0 = 0.0) {
  AtFitOptions o;
  o.pairs = anchored_pairs(t0, 1e-4, 1e-2, 10);
  return o;
}

}  // namespace

TEST_SUITE("at_verifier") {
  TEST_CASE("scalar AT norms in closed form") {
    const OperatorFamily fam = scalar_family([](double t) { return 1.0 + t; });
    CHECK(at_operator_norm(fam, 0.0, 1.0, -1.0).upper == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(at_operator_norm(fam, 0.0, 1.0, -9.0).upper == doctest::Approx(0.05).epsilon(1e-14));
  }

  TEST_CASE("AT norm vanishes on the diagonal and for autonomous families") {
    const OperatorFamily fam = blend_family(0.75, 1.0 / 8);
    for (Complex lam : {Complex(-1.0, 0.0), Complex(-3.0, 4.0), std::polar(1e4, 0.75 * kPi)}) {
      CHECK(at_operator_norm(fam, 0.3, 0.3, lam).upper == 0.0);
      CHECK(at_operator_norm(scalar_family([](double) { return 2.0; }), 0.0, 1.0, lam).upper == 0.0);
    }
  }

  TEST_CASE("AT norm is comparable under swapping the times") {
    const OperatorFamily fam = blend_family(0.75, 1.0 / 8);
    for (double r : {1.0, 100.0, 1e4}) {
      const Complex lam = std::polar(r, 0.75 * kPi);
      const double a = at_operator_norm(fam, 0.2, 0.6, lam).upper;
      const double b = at_operator_norm(fam, 0.6, 0.2, lam).upper;
      CHECK(a <= 10.0 * b);
      CHECK(b <= 10.0 * a);
    }
  }

  TEST_CASE("autonomous family is flagged and not fitted") {
    const ATFit fit = at_fit(scalar_family([](double) { return 3.0; }), anchored());
    CHECK(fit.autonomous);
  }

  TEST_CASE("scalar exponent recovery") {
    for (double beta : {0.6, 0.75, 0.9}) {
      CAPTURE(beta);
      const ATFit fit = at_fit(scalar_family([beta](double t) { return 1.0 + std::pow(std::abs(t), beta); }), anchored());
      CHECK(!fit.autonomous);
      CHECK(fit.beta_fit == doctest::Approx(beta).epsilon(0.05 / beta));
      CHECK(fit.gamma_fit <= 0.1);
      CHECK(fit.gamma_fit >= -0.1);
      CHECK(fit.r2_time >= 0.98);
      CHECK(fit.r2_lambda >= 0.98);
      CHECK(fit.admissible);
    }
  }

  TEST_CASE("exponent recovery on a discretized blend") {
    const ATFit fit = at_fit(blend_family(0.9, 1.0 / 16), anchored());
    CHECK(fit.beta_fit >= 0.8);
    CHECK(fit.beta_fit <= 1.0);
    CHECK(fit.admissible);
  }

  TEST_CASE("symmetric fast path agrees with the general evaluation") {
    const OperatorFamily fam = blend_family(0.75, 1.0 / 8);
    // A perturbation far below any fitted digit but above the symmetry test
    // threshold forces the general path.
    MatrixXd P = MatrixXd::Zero(fam.size(), fam.size());
    P(0, 1) = 1e-9 * fam.matrices[0].cwiseAbs().maxCoeff();
    OperatorFamily skew = fam;
    for (MatrixXd& A : skew.matrices) A += P;
    skew.generator = [g = fam.generator, P](double t) { return MatrixXd(g(t) + P); };
    const ATFit a = at_fit(fam, anchored());
    const ATFit b = at_fit(skew, anchored());
    CHECK(a.beta_fit == doctest::Approx(b.beta_fit).epsilon(1e-5));
    CHECK(a.gamma_fit == doctest::Approx(b.gamma_fit).epsilon(1e-5));
    CHECK(a.K_fit == doctest::Approx(b.K_fit).epsilon(1e-5));
  }

  TEST_CASE("at_fit refuses thin sampling") {
    AtFitOptions o;
    o.pairs = anchored_pairs(0.0, 1e-3, 1e-1, 4);
    CHECK_THROWS_AS(at_fit(scalar_family([](double t) { return 1.0 + t; }), o), DomainError);
  }

  TEST_CASE("Hölder defect in closed form") {
    const OperatorFamily fam = scalar_family([](double t) { return 1.0 + t; });
    CHECK(holder_defect(fam, 1.0, 0.0, 0.0).upper == doctest::Approx(1.0).epsilon(1e-14));
    // A(1)^{-gamma} = 2^{-gamma}
    CHECK(holder_defect(fam, 1.0, 0.0, 0.5).upper == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(holder_defect(fam, 1.0, 0.0, 0.999).upper == doctest::Approx(std::pow(2.0, -0.999)).epsilon(1e-10));
    CHECK_THROWS_AS(holder_defect(fam, 1.0, 0.0, 1.0), DomainError);
    CHECK(holder_defect(scalar_family([](double) { return 4.0; }), 1.0, 0.0, 0.3).upper == 0.0);
  }

  TEST_CASE("Hölder defect with gamma = 0 matches a direct computation") {
    const OperatorFamily fam = blend_family(0.75, 1.0 / 12);
    for (auto [t, s] : {std::pair{0.1, 0.7}, std::pair{0.9, 0.25}}) {
      const MatrixXd At = fam.at(t), As = fam.at(s);
      const MatrixXd M = (At - As) * As.inverse();
      const VectorXd d = fam.weights.cwiseSqrt();
      const MatrixXd S = d.asDiagonal() * M * d.cwiseInverse().asDiagonal();
      const double direct = S.jacobiSvd().singularValues()(0);
      CHECK(std::abs(holder_defect(fam, t, s, 0.0).upper - direct) <= 1e-10 * direct);
    }
  }

  TEST_CASE("bounded perturbation bound on the Hölder defect") {
    Rng rng(61);
    const int n = 6;
    MatrixXd G(n, n), B(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        G(i, j) = rng.normal();
        B(i, j) = rng.normal();
      }
    const MatrixXd A0 = G * G.transpose() + 4.0 * MatrixXd::Identity(n, n);
    B = 0.5 * (B + B.transpose());
    auto phi = [](double t) { return std::sqrt(t); };
    const OperatorFamily fam =
        make_family(time_grid(1.0, 8), [&](double t) { return MatrixXd(A0 + phi(t) * B); }, VectorXd::Ones(n));
    const double b = B.jacobiSvd().singularValues()(0);
    for (auto [t, s] : {std::pair{0.0, 1.0}, std::pair{0.25, 0.5}, std::pair{0.875, 0.125}}) {
      const double inv = fam.at(s).inverse().jacobiSvd().singularValues()(0);
      CHECK(holder_defect(fam, t, s, 0.0).upper <= b * std::abs(phi(t) - phi(s)) * inv * (1.0 + 1e-12));
    }
  }

  TEST_CASE("shift search on an autonomous family stops at the first shift") {
    const ShiftSearchResult r = shift_search(scalar_family([](double) { return 2.0; }, 8), {0.0, 1.0, 4.0}, 0.5, 2.0, 2.0);
    CHECK(r.mu_star == 0.0);
    CHECK(r.table.front().second == 0.0);
  }

  TEST_CASE("shift search on a scalar Hölder family") {
    const OperatorFamily fam = scalar_family([](double t) { return 1.0 + std::pow(std::abs(t), 0.75); }, 32);
    const ShiftSearchResult r = shift_search(fam, {0.0, 1.0, 4.0, 16.0, 64.0, 256.0}, 0.5, 2.0, 2.0);
    CHECK(r.nonincreasing);
    CHECK(std::isfinite(r.mu_star));
    for (std::size_t k = 1; k < r.table.size(); ++k) CHECK(r.table[k].second <= 1.05 * r.table[k - 1].second);
  }

  TEST_CASE("an unreachable target exhausts the grid and keeps the table") {
    const OperatorFamily fam = scalar_family([](double t) { return 1.0 + t; }, 8);
    try {
      shift_search(fam, {0.0, 1.0, 10.0}, 0.0, 2.0, 2.0);
      FAIL("expected ExhaustedError");
    } catch (const ExhaustedError& e) {
      CHECK(e.table().size() == 3);
      for (const auto& row : e.table()) CHECK(row.second > 0.0);
    }
  }
}
