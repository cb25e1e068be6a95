#pragma once

// Tensor-grid meshes on the interval, the unit square and the unit disk, the
// flux-form stencil of the divergence-form operator with Dirichlet, Neumann or
// Robin conditions, and the discrete L^p / gradient norms.

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "mrlab/common.hpp"
#include "mrlab/field_models.hpp"

namespace mrlab {

enum class BoundaryCondition { dirichlet, neumann, robin };

std::string to_string(BoundaryCondition bc);
BoundaryCondition bc_from_string(const std::string& name);

struct Mesh {
  int dim = 1;
  DomainKind kind = DomainKind::interval;
  double h = 0.0;
  int cells_per_unit = 0;  // 1/h

  std::vector<Point> nodes;
  VectorXd cell_volumes;                 // quadrature weights, sum = |Omega|
  std::vector<int> boundary_nodes;
  std::vector<Point> boundary_normals;   // aligned with boundary_nodes
  VectorXd boundary_measure;             // surface measure lumped per boundary node
  std::vector<int> interior_nodes;       // the Dirichlet unknowns
  std::vector<int> all_nodes;

  // Tensor structure: integer grid coordinates per node and the inverse map.
  std::vector<std::array<int, 2>> coords;
  int grid_min = 0;
  int grid_max = 0;
  std::vector<int> lookup;

  int node_at(int i, int j) const;
  std::size_t size() const { return nodes.size(); }
  bool is_boundary(int node) const { return boundary_index_[static_cast<std::size_t>(node)] >= 0; }
  int boundary_slot(int node) const { return boundary_index_[static_cast<std::size_t>(node)]; }

  std::vector<int> boundary_index_;
};

/// Default cap on node count for build_mesh.
inline constexpr std::size_t kDefaultNodeBudget = 4'000'000;

Mesh build_mesh(DomainKind kind, double h, std::size_t node_budget = kDefaultNodeBudget);

/// Node indices carrying unknowns: interior nodes for Dirichlet, all nodes otherwise.
const std::vector<int>& dof_nodes(const Mesh& mesh, BoundaryCondition bc);

/// Quadrature weights restricted to the unknowns.
VectorXd dof_weights(const Mesh& mesh, BoundaryCondition bc);

/// Scatter unknowns to a full node vector (zero on eliminated Dirichlet nodes).
VectorXd extend_to_nodes(const Mesh& mesh, BoundaryCondition bc, const VectorXd& dofs);

/// Gather the unknowns from a full node vector.
VectorXd restrict_to_dofs(const Mesh& mesh, BoundaryCondition bc, const VectorXd& nodal);

/// Samples a function at the unknowns.
VectorXd sample(const Mesh& mesh, BoundaryCondition bc, const std::function<double(const Point&)>& fn);

/// Sparse matrix of -div(A grad u + a u) + b . grad u + c0 u at time t.
Eigen::SparseMatrix<double> assemble_operator(const Mesh& mesh, const CoefficientField& field,
                                              BoundaryCondition bc, double t);

/// (sum_i w_i |v_i|^p)^(1/p); max |v_i| for p = inf.
template <typename Derived>
double lp_norm(const VectorXd& weights, double p, const Eigen::MatrixBase<Derived>& v) {
  if (weights.size() != v.size()) throw DomainError("lp_norm: weight/vector size mismatch");
  if (!(p >= 1.0)) throw DomainError("lp_norm: exponent must be >= 1");
  if (std::isinf(p)) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) m = std::max(m, static_cast<double>(std::abs(v(i))));
    return m;
  }
  // Scale by the largest entry to avoid overflow of |v|^p.
  double scale = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) scale = std::max(scale, static_cast<double>(std::abs(v(i))));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += weights(i) * std::pow(std::abs(v(i)) / scale, p);
  return scale * std::pow(s, 1.0 / p);
}

/// Discrete ||grad v||_p of a full node vector. Differences live on face
/// midpoints; in 2D the two parallel faces of each grid cell are averaged into a
/// cell-centred gradient integrated with weight h^2.
double gradient_norm(const Mesh& mesh, const VectorXd& nodal, double p);

/// C^2 cut-off equal to 1 for r <= R/2 and 0 for r >= R.
double cutoff_bump(double r, double radius);

/// Samples of w = u psi with u(x,y) = x / (x^2+y^2)^(1/4), u(0) = 0.
VectorXd meyers_witness(const Mesh& mesh, double cutoff_radius);

/// Uniform (grading = 1) or graded time grid t_i = T (i/m)^grading.
std::vector<double> time_grid(double horizon, int steps, double grading = 1.0);

/// A family of operator matrices on a time grid acting on weighted l^p.
struct OperatorFamily {
  std::vector<double> times;
  std::vector<MatrixXd> matrices;
  VectorXd weights;
  double p = 2.0;
  double mu = 0.0;
  BoundaryCondition bc = BoundaryCondition::dirichlet;
  /// Evaluates the (already shifted) operator between grid nodes. When unset,
  /// off-grid values are linear interpolants of the node matrices.
  std::function<MatrixXd(double)> generator;

  Eigen::Index size() const { return weights.size(); }
  int nodes() const { return static_cast<int>(times.size()); }
  double horizon() const { return times.back(); }
  MatrixXd at(double t) const;
  /// Same family with mu added to every operator (and to the recorded shift).
  OperatorFamily shifted(double extra_mu) const;
  bool autonomous() const;
};

OperatorFamily build_family(const Mesh& mesh, const CoefficientField& field, BoundaryCondition bc,
                            const std::vector<double>& times, double p, double mu = 0.0);

/// Family from explicit matrices (used for synthetic and scalar problems).
OperatorFamily make_family(std::vector<double> times, std::function<MatrixXd(double)> generator,
                           VectorXd weights, double p = 2.0);

}  // namespace mrlab
