#include <doctest.h>

#include "mrlab/nacp_solver.hpp"

using namespace mrlab;

namespace {

OperatorFamily constant_family(const MatrixXd& A, int steps, double T = 1.0) {
  return make_family(time_grid(T, steps), [A](double) { return A; }, VectorXd::Ones(A.rows()));
}

OperatorFamily scalar_family(std::function<double(double)> a, int steps) {
  return make_family(time_grid(1.0, steps), [a](double t) { return MatrixXd::Constant(1, 1, a(t)); },
                     VectorXd::Ones(1));
}

NacpProblem problem(OperatorFamily fam, VectorXd u0, std::function<VectorXd(double)> f) {
  NacpProblem pr;
  pr.family = std::move(fam);
  pr.u0 = std::move(u0);
  pr.f = sample_in_time(pr.family, f);
  return pr;
}

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }

OperatorFamily blend_family(int unknowns, int steps, double mu = 0.0) {
  HolderBlendParams hp;
  hp.beta_time = 0.75;
  const Mesh m = build_mesh(DomainKind::interval, 1.0 / (unknowns + 1));
  return build_family(m, holder_blend(1, DomainKind::interval, hp), BoundaryCondition::dirichlet,
                      time_grid(1.0, steps), 2.0, mu);
}

VectorXd bump(const OperatorFamily& fam) {
  VectorXd v(fam.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double x = (i + 1.0) / (v.size() + 1.0);
    v(i) = std::sin(kPi * x);
  }
  return v;
}

}  // namespace

TEST_SUITE("nacp_solver") {
  TEST_CASE("R on scalar and diagonal problems") {
    const Trajectory r = assemble_R(constant_family(MatrixXd::Constant(1, 1, 1.0), 1), scalar(1.0));
    CHECK(r[1](0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    const Trajectory d = assemble_R(constant_family(Eigen::Vector2d(1.0, 2.0).asDiagonal().toDenseMatrix(), 1),
                                    VectorXd::Ones(2));
    CHECK(d[1](0) == doctest::Approx(0.36788).epsilon(1e-5));
    CHECK(d[1](1) == doctest::Approx(2.0 * std::exp(-2.0)).epsilon(1e-14));
    for (const VectorXd& v : assemble_R(constant_family(MatrixXd::Identity(2, 2), 4), VectorXd::Zero(2)))
      CHECK(v.norm() == 0.0);
  }

  TEST_CASE("S with exact cell integrals") {
    const OperatorFamily one = constant_family(MatrixXd::Constant(1, 1, 1.0), 1);
    CHECK(assemble_S(one, {scalar(1.0), scalar(1.0)})[1](0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
    const OperatorFamily two = constant_family(MatrixXd::Constant(1, 1, 2.0), 2);
    const Trajectory s = assemble_S(two, {scalar(0.0), scalar(1.0), scalar(0.0)});
    CHECK(s[2](0) == doctest::Approx(std::exp(-1.0) - std::exp(-2.0)).epsilon(1e-14));
    CHECK(s[2](0) == doctest::Approx(0.23254).epsilon(1e-4));
    for (const VectorXd& v : assemble_S(two, zero_trajectory(two))) CHECK(v.norm() == 0.0);
  }

  TEST_CASE("Q block of a scalar two-cell family") {
    const QOperator Q(scalar_family([](double t) { return 1.0 + t; }, 2));
    const double expect = 2.0 * (std::exp(-1.0) - std::exp(-2.0)) * (1.0 / 1.25 - 0.5);
    CHECK(Q.block(2, 1)(0, 0) == doctest::Approx(expect).epsilon(1e-13));
    CHECK(expect == doctest::Approx(0.13952).epsilon(1e-4));
  }

  TEST_CASE("Q vanishes on autonomous families") {
    Rng rng(71);
    MatrixXd A = MatrixXd::Random(4, 4);
    A = A * A.transpose() + MatrixXd::Identity(4, 4);
    CHECK(assemble_Q(constant_family(A, 5)).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("Q is causal") {
    const OperatorFamily fam = blend_family(7, 6);
    const QOperator Q(fam);
    Trajectory g = zero_trajectory(fam);
    g.back() = bump(fam);
    const Trajectory out = Q.apply(g);
    for (int i = 0; i + 1 < fam.nodes(); ++i) CHECK(out[static_cast<std::size_t>(i)].norm() == 0.0);
    CHECK(out.back().norm() > 0.0);
    // apply_transpose is the transpose of the dense matrix
    const MatrixXd D = Q.dense();
    Trajectory y = zero_trajectory(fam);
    for (std::size_t i = 1; i < y.size(); ++i) y[i] = bump(fam) * static_cast<double>(i);
    VectorXd ys(D.rows());
    for (std::size_t i = 1; i < y.size(); ++i) ys.segment(static_cast<Eigen::Index>(i - 1) * fam.size(), fam.size()) = y[i];
    const VectorXd expect = D.transpose() * ys;
    const Trajectory got = Q.apply_transpose(y);
    for (std::size_t i = 1; i < y.size(); ++i)
      CHECK((got[i] - expect.segment(static_cast<Eigen::Index>(i - 1) * fam.size(), fam.size())).norm() <=
            1e-12 * expect.norm());
  }

  TEST_CASE("autonomous problems are solved exactly") {
    NacpProblem pr = problem(constant_family(MatrixXd::Constant(1, 1, 1.0), 10), scalar(1.0),
                             [](double) { return scalar(0.0); });
    MRSolveResult r = solve_at(pr);
    CHECK(r.u[0](0) == 1.0);
    CHECK(r.u.back()(0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

    pr = problem(constant_family(MatrixXd::Constant(1, 1, 1.0), 10), scalar(0.0), [](double) { return scalar(1.0); });
    r = solve_at(pr);
    for (int i = 0; i < pr.family.nodes(); ++i)
      CHECK(r.u[static_cast<std::size_t>(i)](0) ==
            doctest::Approx(1.0 - std::exp(-pr.family.times[static_cast<std::size_t>(i)])).epsilon(1e-12));
  }

  TEST_CASE("zero data give the zero solution and no constant") {
    NacpProblem pr = problem(blend_family(9, 8), VectorXd::Zero(9), [](double) { return VectorXd::Zero(9); });
    const MRSolveResult r = solve_at(pr);
    for (const VectorXd& v : r.u) CHECK(v.norm() == 0.0);
    CHECK(!r.c_mr.has_value());
  }

  TEST_CASE("solution satisfies the discrete equation") {
    NacpProblem pr = problem(blend_family(15, 12), VectorXd::Zero(15), [](double t) { return VectorXd::Constant(15, 1.0 + t); });
    pr.u0 = bump(pr.family);
    const MRSolveResult r = solve_at(pr);
    double scale = 0.0;
    for (const VectorXd& v : r.Au) scale = std::max(scale, v.cwiseAbs().maxCoeff());
    for (int i = 1; i < pr.family.nodes(); ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      CHECK((r.udot[k] + pr.family.matrices[k] * r.u[k] - pr.f[k]).cwiseAbs().maxCoeff() <= 1e-10 * scale);
    }
    CHECK((r.u[0] - pr.u0).norm() == 0.0);
  }

  TEST_CASE("Neumann iteration agrees with the block solve once Q contracts") {
    NacpProblem pr = problem(blend_family(15, 16, 64.0), VectorXd::Zero(15), [](double t) { return VectorXd::Constant(15, std::cos(t)); });
    pr.u0 = bump(pr.family);
    const MRSolveResult direct = solve_at(pr, DirectBlock{}, true);
    REQUIRE(direct.q_norm.has_value());
    REQUIRE(*direct.q_norm < 1.0);
    const MRSolveResult neu = solve_at(pr, Neumann{});
    CHECK(neu.neumann_iters > 0);
    for (std::size_t i = 0; i < direct.u.size(); ++i)
      CHECK((direct.u[i] - neu.u[i]).norm() <= 1e-8 * std::max(1.0, direct.u[i].norm()));
  }

  TEST_CASE("Crank-Nicolson oracle") {
    NacpProblem pr = problem(constant_family(MatrixXd::Constant(1, 1, 1.0), 10), scalar(1.0),
                             [](double) { return scalar(0.0); });
    CHECK(std::abs(cn_oracle(pr, 100).back()(0) - std::exp(-1.0)) <= 1e-6);

    const NacpProblem nonaut = problem(scalar_family([](double t) { return 1.0 + t; }, 8), scalar(1.0),
                                       [](double) { return scalar(0.0); });
    std::vector<double> err;
    for (int refine : {1, 2, 4, 8}) err.push_back(std::abs(cn_oracle(nonaut, refine).back()(0) - std::exp(-1.5)));
    for (std::size_t k = 1; k < err.size(); ++k) CHECK(err[k - 1] / err[k] == doctest::Approx(4.0).epsilon(0.1));

    const MatrixXd D = Eigen::Vector2d(1.0, 2.0).asDiagonal();
    const NacpProblem diag = problem(constant_family(D, 8), Eigen::Vector2d(1.0, -1.0), [](double t) {
      return Eigen::Vector2d(t, 1.0).eval();
    });
    const Trajectory both = cn_oracle(diag, 3);
    for (int c = 0; c < 2; ++c) {
      const NacpProblem one = problem(constant_family(MatrixXd::Constant(1, 1, D(c, c)), 8), scalar(c ? -1.0 : 1.0),
                                      [c](double t) { return scalar(c ? 1.0 : t); });
      const Trajectory single = cn_oracle(one, 3);
      for (std::size_t i = 0; i < single.size(); ++i) CHECK(single[i](0) == both[i](c));
    }
  }

  TEST_CASE("representation solver tracks Crank-Nicolson on a Hölder family") {
    std::vector<double> dist;
    for (int steps : {16, 32, 64}) {
      NacpProblem pr = problem(blend_family(15, steps), VectorXd::Zero(15), [](double) { return VectorXd::Ones(15); });
      pr.u0 = bump(pr.family);
      const MRSolveResult r = solve_at(pr);
      const Trajectory cn = cn_oracle(pr, 8);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < cn.size(); ++i) {
        num = std::max(num, (r.u[i] - cn[i]).norm());
        den = std::max(den, cn[i].norm());
      }
      dist.push_back(num / den);
    }
    CHECK(dist.front() <= 1e-2);
    for (std::size_t k = 1; k < dist.size(); ++k) CHECK(dist[k] < dist[k - 1]);
  }

  TEST_CASE("mixed norms") {
    const OperatorFamily fam = constant_family(MatrixXd::Identity(1, 1), 4);
    Trajectory c(5, scalar(2.0));
    for (double q : {1.0, 2.0, 5.0}) CHECK(mixed_norm(c, fam, q, 2.0) == doctest::Approx(2.0));
    CHECK(mixed_norm(zero_trajectory(fam), fam, 2.0, 2.0) == 0.0);
    const Trajectory half = {scalar(7.0), scalar(1.0), scalar(1.0), scalar(0.0), scalar(0.0)};
    CHECK(mixed_norm(half, fam, 2.0, 2.0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  }

  TEST_CASE("maximal regularity constant of the scalar forced problem") {
    const int steps = 256;
    NacpProblem pr = problem(constant_family(MatrixXd::Constant(1, 1, 1.0), steps), scalar(0.0),
                             [](double) { return scalar(1.0); });
    const MRSolveResult r = solve_at(pr);
    REQUIRE(r.c_mr.has_value());
    // Right-endpoint sums of the exact nodal values.
    double a = 0.0, b = 0.0;
    for (int i = 1; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      a += std::exp(-2.0 * t) / steps;
      b += (1.0 - std::exp(-t)) * (1.0 - std::exp(-t)) / steps;
    }
    CHECK(*r.c_mr == doctest::Approx(std::sqrt(a) + std::sqrt(b)).epsilon(1e-10));
    // Continuum integrals: int e^{-2t} and int (1 - e^{-t})^2 over (0, 1).
    const double ia = (1.0 - std::exp(-2.0)) / 2.0;
    const double ib = 1.0 - 2.0 * (1.0 - std::exp(-1.0)) + ia;
    CHECK(*r.c_mr == doctest::Approx(std::sqrt(ia) + std::sqrt(ib)).epsilon(1e-2));
  }

  TEST_CASE("maximal regularity constant is invariant under data scaling") {
    NacpProblem pr = problem(blend_family(11, 12), VectorXd::Zero(11), [](double t) { return VectorXd::Constant(11, 1.0 + t); });
    pr.u0 = bump(pr.family);
    const double c1 = *solve_at(pr).c_mr;
    for (VectorXd& v : pr.f) v *= 2.0;
    pr.u0 *= 2.0;
    CHECK(*solve_at(pr).c_mr == doctest::Approx(c1).epsilon(1e-12));
  }

  TEST_CASE("shifted scalar problem follows the exponential transform") {
    const double a = 1.5, fc = 0.7, u0 = 0.3;
    for (double mu : {0.0, 1.0, 10.0}) {
      const OperatorFamily fam = constant_family(MatrixXd::Constant(1, 1, a), 16).shifted(mu);
      const NacpProblem pr = problem(fam, scalar(u0), [fc](double) { return scalar(fc); });
      const MRSolveResult r = solve_at(pr);
      for (std::size_t i = 0; i < fam.times.size(); ++i) {
        const double t = fam.times[i];
        // v solves the unshifted problem with forcing e^{mu s} f
        const double v = std::exp(-a * t) * u0 + fc * std::exp(-a * t) * (std::exp((a + mu) * t) - 1.0) / (a + mu);
        CHECK(r.u[i](0) == doctest::Approx(std::exp(-mu * t) * v).epsilon(1e-8));
      }
    }
  }

  TEST_CASE("truncating the forcing does not change the past") {
    const double tau = 0.5;
    NacpProblem full = problem(blend_family(9, 16), VectorXd::Zero(9), [](double t) { return VectorXd::Constant(9, 1.0 + t); });
    NacpProblem cut = full;
    for (std::size_t i = 0; i < cut.f.size(); ++i)
      if (cut.family.times[i] > tau) cut.f[i].setZero();
    const MRSolveResult a = solve_at(full), b = solve_at(cut);
    for (std::size_t i = 0; i < a.u.size(); ++i)
      if (full.family.times[i] <= tau) CHECK((a.u[i] - b.u[i]).norm() == 0.0);
  }
}
