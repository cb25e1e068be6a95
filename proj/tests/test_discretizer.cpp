#include <doctest.h>

#include <limits>

#include <Eigen/Eigenvalues>

#include "mrlab/discretizer.hpp"

using namespace mrlab;

namespace {

MatrixXd dense(const Eigen::SparseMatrix<double>& A) { return MatrixXd(A); }

int node_near(const Mesh& m, const Point& x) {
  for (std::size_t k = 0; k < m.size(); ++k)
    if ((m.nodes[k] - x).norm() < 1e-12) return static_cast<int>(k);
  return -1;
}

}  // namespace

TEST_SUITE("discretizer") {
  TEST_CASE("interval mesh with h = 1/2") {
    const Mesh m = build_mesh(DomainKind::interval, 0.5);
    REQUIRE(m.interior_nodes.size() == 1);
    CHECK(m.nodes[static_cast<std::size_t>(m.interior_nodes[0])][0] == doctest::Approx(0.5));
    CHECK(m.cell_volumes.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("square mesh with h = 1/4 has a 3 x 3 interior grid") {
    const Mesh m = build_mesh(DomainKind::square, 0.25);
    CHECK(m.interior_nodes.size() == 9);
    CHECK(m.cell_volumes.sum() == doctest::Approx(1.0).epsilon(1e-10));
  }

  TEST_CASE("disk mesh: nodes inside, radial unit normals, area close to pi") {
    const Mesh m = build_mesh(DomainKind::disk, 0.1);
    for (const Point& x : m.nodes) CHECK(x.norm() <= 1.0 + 1e-12);
    REQUIRE(m.boundary_normals.size() == m.boundary_nodes.size());
    for (std::size_t k = 0; k < m.boundary_nodes.size(); ++k) {
      const Point& n = m.boundary_normals[k];
      const Point x = m.nodes[static_cast<std::size_t>(m.boundary_nodes[k])];
      CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK((n - x.normalized()).norm() < 1e-2);
    }
    CHECK(m.cell_volumes.sum() == doctest::Approx(kPi).epsilon(0.05));
  }

  TEST_CASE("1D Dirichlet stencil with h = 1/2 is [8]") {
    const Mesh m = build_mesh(DomainKind::interval, 0.5);
    const MatrixXd A = dense(assemble_operator(m, identity_field(1, DomainKind::interval), BoundaryCondition::dirichlet, 0.0));
    REQUIRE(A.rows() == 1);
    CHECK(A(0, 0) == doctest::Approx(8.0));
  }

  TEST_CASE("2D identity with h = 1/4 gives the five-point stencil") {
    const double h = 0.25;
    const Mesh m = build_mesh(DomainKind::square, h);
    const MatrixXd A = dense(assemble_operator(m, identity_field(2, DomainKind::square), BoundaryCondition::dirichlet, 0.0));
    const auto& dofs = dof_nodes(m, BoundaryCondition::dirichlet);
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      CHECK(A(i, i) == doctest::Approx(4.0 / (h * h)));
      for (Eigen::Index j = 0; j < A.cols(); ++j) {
        if (i == j) continue;
        const double d = (m.nodes[static_cast<std::size_t>(dofs[static_cast<std::size_t>(i)])] -
                          m.nodes[static_cast<std::size_t>(dofs[static_cast<std::size_t>(j)])])
                             .norm();
        CHECK(A(i, j) == doctest::Approx(std::abs(d - h) < 1e-12 ? -1.0 / (h * h) : 0.0));
      }
    }
  }

  TEST_CASE("Robin with zero coefficient is bit-identical to Neumann") {
    RobinParams rp;
    rp.beta0 = 0.0;
    rp.amplitude = 0.0;
    for (DomainKind kind : {DomainKind::interval, DomainKind::square}) {
      const int dim = kind == DomainKind::interval ? 1 : 2;
      const Mesh m = build_mesh(kind, 0.125);
      const CoefficientField robin = robin_field(dim, kind, rp);
      CoefficientField neumann = robin;
      neumann.robin_beta = nullptr;
      const MatrixXd R = dense(assemble_operator(m, robin, BoundaryCondition::robin, 0.3));
      const MatrixXd N = dense(assemble_operator(m, neumann, BoundaryCondition::neumann, 0.3));
      CHECK((R - N).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  TEST_CASE("assembly consistency: residual on sin(pi x) decays at second order") {
    std::vector<double> res;
    for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
      const Mesh m = build_mesh(DomainKind::interval, h);
      const auto A = assemble_operator(m, identity_field(1, DomainKind::interval), BoundaryCondition::dirichlet, 0.0);
      const VectorXd u = sample(m, BoundaryCondition::dirichlet, [](const Point& x) { return std::sin(kPi * x[0]); });
      res.push_back((A * u - kPi * kPi * u).norm() / (kPi * kPi * u.norm()));
    }
    CHECK(res[0] / res[1] == doctest::Approx(4.0).epsilon(0.05));
    CHECK(res[1] / res[2] == doctest::Approx(4.0).epsilon(0.05));
  }

  TEST_CASE("Dirichlet matrices of symmetric fields are weighted-SPD with coercive spectrum") {
    CheckerboardParams cp;
    cp.mollify_width = 0.03;
    for (const CoefficientField& f : {identity_field(2, DomainKind::square), checkerboard_field(cp),
                                      holder_blend(2, DomainKind::square, {})}) {
      const Mesh m = build_mesh(DomainKind::square, 1.0 / 12);
      const OperatorFamily fam = build_family(m, f, BoundaryCondition::dirichlet, {0.0, 0.5, 1.0}, 2.0);
      for (const MatrixXd& A : fam.matrices) {
        const MatrixXd K = fam.weights.asDiagonal() * A;
        CHECK((K - K.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * K.cwiseAbs().maxCoeff());
        const double lmin = Eigen::SelfAdjointEigenSolver<MatrixXd>(K).eigenvalues().minCoeff();
        CHECK(lmin > 0.0);
        // Discrete Poincaré: the smallest eigenvalue of the generalized problem is
        // at least alpha0 times the one of the Laplacian (about 2 pi^2).
        const VectorXd d = fam.weights.cwiseSqrt();
        const MatrixXd S = d.asDiagonal() * A * d.cwiseInverse().asDiagonal();
        const double lam = Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (S + S.transpose())).eigenvalues().minCoeff();
        CHECK(lam >= f.alpha0 * 2.0 * kPi * kPi * 0.95);
      }
    }
  }

  TEST_CASE("numerical range lies in a right half-plane after the shift") {
    DriftParams dp;
    dp.b = Point(3.0, -1.0);
    const Mesh m = build_mesh(DomainKind::square, 1.0 / 10);
    const OperatorFamily fam =
        build_family(m, drift_field(2, DomainKind::square, dp), BoundaryCondition::dirichlet, {0.0, 1.0}, 2.0, 1.0);
    CHECK(fam.mu == 1.0);
    const VectorXd d = fam.weights.cwiseSqrt();
    for (const MatrixXd& A : fam.matrices) {
      const MatrixXd S = d.asDiagonal() * A * d.cwiseInverse().asDiagonal();
      CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (S + S.transpose())).eigenvalues().minCoeff() > 0.0);
    }
  }

  TEST_CASE("lp_norm examples") {
    CHECK(lp_norm(VectorXd::Constant(1, 1.0), 2.0, VectorXd::Constant(1, 3.0)) == doctest::Approx(3.0));
    CHECK(lp_norm(VectorXd::Constant(2, 0.5), 2.0, VectorXd::Ones(2)) == doctest::Approx(1.0));
    CHECK(lp_norm(VectorXd::Constant(2, 0.5), 4.0, (VectorXd(2) << 2.0, 0.0).finished()) ==
          doctest::Approx(2.0 * std::pow(0.5, 0.25)));
    CHECK(lp_norm(VectorXd::Constant(2, 0.5), std::numeric_limits<double>::infinity(),
                  (VectorXd(2) << -2.0, 1.0).finished()) == 2.0);
    CHECK_THROWS_AS(lp_norm(VectorXd::Ones(2), 2.0, VectorXd::Ones(3)), DomainError);
  }

  TEST_CASE("gradient norm of linear and constant functions") {
    const Mesh m = build_mesh(DomainKind::interval, 1.0 / 20);
    VectorXd x(static_cast<Eigen::Index>(m.size()));
    for (std::size_t k = 0; k < m.size(); ++k) x(static_cast<Eigen::Index>(k)) = m.nodes[k][0];
    CHECK(gradient_norm(m, x, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gradient_norm(m, x, 3.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gradient_norm(m, VectorXd::Constant(x.size(), 2.5), 4.0) == 0.0);
    const Mesh sq = build_mesh(DomainKind::square, 1.0 / 8);
    CHECK(gradient_norm(sq, VectorXd::Constant(static_cast<Eigen::Index>(sq.size()), 1.0), 2.0) == 0.0);
  }

  TEST_CASE("Meyers profile: p = 4 gradient grows, p = 2 gradient settles") {
    std::vector<double> g2, g4;
    for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128}) {
      const Mesh m = build_mesh(DomainKind::disk, h);
      VectorXd u(static_cast<Eigen::Index>(m.size()));
      for (std::size_t k = 0; k < m.size(); ++k) {
        const Point& x = m.nodes[k];
        u(static_cast<Eigen::Index>(k)) = x.squaredNorm() == 0.0 ? 0.0 : x[0] / std::pow(x.squaredNorm(), 0.25);
      }
      g2.push_back(gradient_norm(m, u, 2.0));
      g4.push_back(gradient_norm(m, u, 4.0));
    }
    // ||grad u||_4^4 diverges like log(1/h), so each halving multiplies the norm by
    // roughly (1 + log 2 / log(1/h))^{1/4}.
    for (std::size_t k = 1; k < g4.size(); ++k) {
      CHECK(g4[k] > g4[k - 1]);
      MESSAGE("p = 4 growth per halving: " << g4[k] / g4[k - 1]);
    }
    CHECK(g4.back() / g4.front() > 1.1);
    // The profile lies in W^{1,2}: the p = 2 norms settle.
    CHECK(std::abs(g2.back() / g2[g2.size() - 2] - 1.0) < 0.05);
  }

  TEST_CASE("witness values near the origin, at the origin and past the cutoff") {
    const Mesh m = build_mesh(DomainKind::disk, 0.1);
    const VectorXd w = meyers_witness(m, 0.5);
    const int a = node_near(m, Point(0.1, 0.0));
    const int o = node_near(m, Point(0.0, 0.0));
    const int far = node_near(m, Point(0.9, 0.0));
    const int edge = node_near(m, Point(0.5, 0.0));
    REQUIRE(a >= 0);
    REQUIRE(o >= 0);
    REQUIRE(far >= 0);
    REQUIRE(edge >= 0);
    CHECK(w(a) == doctest::Approx(std::sqrt(0.1)).epsilon(1e-12));
    CHECK(w(o) == 0.0);
    CHECK(w(far) == 0.0);
    CHECK(w(edge) == 0.0);
    CHECK_THROWS_AS(meyers_witness(build_mesh(DomainKind::square, 0.25), 0.5), DomainError);
  }

  TEST_CASE("time grids") {
    const auto g = time_grid(2.0, 4);
    REQUIRE(g.size() == 5);
    CHECK(g[1] == doctest::Approx(0.5));
    CHECK(g.back() == 2.0);
    const auto gg = time_grid(1.0, 4, 2.0);
    CHECK(gg[1] == doctest::Approx(1.0 / 16));
    CHECK_THROWS_AS(time_grid(1.0, 0), DomainError);
  }
}
