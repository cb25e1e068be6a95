#include "mrlab/discretizer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace mrlab {

std::string to_string(BoundaryCondition bc) {
  switch (bc) {
    case BoundaryCondition::dirichlet:
      return "dirichlet";
    case BoundaryCondition::neumann:
      return "neumann";
    case BoundaryCondition::robin:
      return "robin";
  }
  return "unknown";
}

BoundaryCondition bc_from_string(const std::string& name) {
  if (name == "dirichlet") return BoundaryCondition::dirichlet;
  if (name == "neumann") return BoundaryCondition::neumann;
  if (name == "robin") return BoundaryCondition::robin;
  throw DomainError("unknown boundary condition '" + name + "'");
}

int Mesh::node_at(int i, int j) const {
  const int span = grid_max - grid_min + 1;
  if (i < grid_min || i > grid_max) return -1;
  if (dim == 1) return lookup[static_cast<std::size_t>(i - grid_min)];
  if (j < grid_min || j > grid_max) return -1;
  return lookup[static_cast<std::size_t>(i - grid_min) * span + (j - grid_min)];
}

Mesh build_mesh(DomainKind kind, double h, std::size_t node_budget) {
  if (!(h > 0.0) || h > 0.5) throw DomainError("build_mesh: h must lie in (0, 0.5]");
  Mesh mesh;
  mesh.kind = kind;
  mesh.dim = kind == DomainKind::interval ? 1 : 2;
  const int m = static_cast<int>(std::lround(1.0 / h));
  mesh.cells_per_unit = m;
  mesh.h = 1.0 / m;
  const double hh = mesh.h;

  const double estimate = kind == DomainKind::interval ? m + 1.0
                          : kind == DomainKind::square ? (m + 1.0) * (m + 1.0)
                                                       : kPi * (m + 1.0) * (m + 1.0);
  if (estimate > static_cast<double>(node_budget)) {
    throw ResourceError("build_mesh: about " + std::to_string(static_cast<long long>(estimate)) +
                        " nodes exceed the budget of " + std::to_string(node_budget));
  }

  mesh.grid_min = kind == DomainKind::disk ? -m : 0;
  mesh.grid_max = m;
  const int span = mesh.grid_max - mesh.grid_min + 1;
  mesh.lookup.assign(mesh.dim == 1 ? static_cast<std::size_t>(span) : static_cast<std::size_t>(span) * span, -1);

  auto add = [&](int i, int j) {
    const int id = static_cast<int>(mesh.nodes.size());
    mesh.nodes.emplace_back(i * hh, mesh.dim == 2 ? j * hh : 0.0);
    mesh.coords.push_back({i, j});
    if (mesh.dim == 1) {
      mesh.lookup[static_cast<std::size_t>(i - mesh.grid_min)] = id;
    } else {
      mesh.lookup[static_cast<std::size_t>(i - mesh.grid_min) * span + (j - mesh.grid_min)] = id;
    }
  };

  if (kind == DomainKind::interval) {
    for (int i = 0; i <= m; ++i) add(i, 0);
  } else {
    for (int i = mesh.grid_min; i <= mesh.grid_max; ++i) {
      for (int j = mesh.grid_min; j <= mesh.grid_max; ++j) {
        if (kind == DomainKind::disk && static_cast<long long>(i) * i + static_cast<long long>(j) * j >
                                            static_cast<long long>(m) * m) {
          continue;
        }
        add(i, j);
      }
    }
  }

  const std::size_t n = mesh.nodes.size();
  mesh.cell_volumes = VectorXd::Zero(static_cast<Eigen::Index>(n));
  mesh.boundary_index_.assign(n, -1);
  std::vector<double> measure;

  auto mark_boundary = [&](int id, const Point& normal, double length) {
    mesh.boundary_index_[static_cast<std::size_t>(id)] = static_cast<int>(mesh.boundary_nodes.size());
    mesh.boundary_nodes.push_back(id);
    mesh.boundary_normals.push_back(normal.normalized());
    measure.push_back(length);
  };

  for (std::size_t id = 0; id < n; ++id) {
    const int i = mesh.coords[id][0], j = mesh.coords[id][1];
    const int nid = static_cast<int>(id);
    switch (kind) {
      case DomainKind::interval: {
        const bool edge = i == 0 || i == m;
        mesh.cell_volumes(nid) = edge ? 0.5 * hh : hh;
        if (edge) mark_boundary(nid, Point(i == 0 ? -1.0 : 1.0, 0.0), 1.0);
        break;
      }
      case DomainKind::square: {
        const bool ex = i == 0 || i == m, ey = j == 0 || j == m;
        mesh.cell_volumes(nid) = hh * hh * (ex ? 0.5 : 1.0) * (ey ? 0.5 : 1.0);
        if (ex || ey) {
          Point normal(0.0, 0.0);
          if (i == 0) normal[0] = -1.0;
          if (i == m) normal[0] = 1.0;
          if (j == 0) normal[1] = -1.0;
          if (j == m) normal[1] = 1.0;
          // Edge nodes own h of boundary, corners h/2 on each of two sides.
          mark_boundary(nid, normal, hh);
        }
        break;
      }
      case DomainKind::disk: {
        const bool edge = mesh.node_at(i + 1, j) < 0 || mesh.node_at(i - 1, j) < 0 || mesh.node_at(i, j + 1) < 0 ||
                          mesh.node_at(i, j - 1) < 0;
        mesh.cell_volumes(nid) = hh * hh;
        if (edge) {
          const Point x = mesh.nodes[id];
          mark_boundary(nid, x.norm() > 0 ? x : Point(1.0, 0.0), 0.0);
        }
        break;
      }
    }
  }

  if (kind == DomainKind::disk) {
    // Interior cells lie inside the disk; the boundary ring absorbs the rest of
    // the area and the circumference in equal shares.
    const double nb = static_cast<double>(mesh.boundary_nodes.size());
    const double interior_area = hh * hh * (static_cast<double>(n) - nb);
    const double share = (kPi - interior_area) / nb;
    for (int id : mesh.boundary_nodes) mesh.cell_volumes(id) = share;
    for (double& len : measure) len = 2.0 * kPi / nb;
  }

  mesh.boundary_measure = Eigen::Map<VectorXd>(measure.data(), static_cast<Eigen::Index>(measure.size()));
  for (std::size_t id = 0; id < n; ++id) {
    if (mesh.boundary_index_[id] < 0) mesh.interior_nodes.push_back(static_cast<int>(id));
    mesh.all_nodes.push_back(static_cast<int>(id));
  }
  return mesh;
}

const std::vector<int>& dof_nodes(const Mesh& mesh, BoundaryCondition bc) {
  return bc == BoundaryCondition::dirichlet ? mesh.interior_nodes : mesh.all_nodes;
}

VectorXd dof_weights(const Mesh& mesh, BoundaryCondition bc) {
  const auto& dofs = dof_nodes(mesh, bc);
  VectorXd w(static_cast<Eigen::Index>(dofs.size()));
  for (std::size_t k = 0; k < dofs.size(); ++k) w(static_cast<Eigen::Index>(k)) = mesh.cell_volumes(dofs[k]);
  return w;
}

VectorXd extend_to_nodes(const Mesh& mesh, BoundaryCondition bc, const VectorXd& dofs) {
  const auto& idx = dof_nodes(mesh, bc);
  if (static_cast<std::size_t>(dofs.size()) != idx.size()) throw DomainError("extend_to_nodes: size mismatch");
  VectorXd full = VectorXd::Zero(static_cast<Eigen::Index>(mesh.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) full(idx[k]) = dofs(static_cast<Eigen::Index>(k));
  return full;
}

VectorXd restrict_to_dofs(const Mesh& mesh, BoundaryCondition bc, const VectorXd& nodal) {
  const auto& idx = dof_nodes(mesh, bc);
  if (static_cast<std::size_t>(nodal.size()) != mesh.size()) throw DomainError("restrict_to_dofs: size mismatch");
  VectorXd v(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) v(static_cast<Eigen::Index>(k)) = nodal(idx[k]);
  return v;
}

VectorXd sample(const Mesh& mesh, BoundaryCondition bc, const std::function<double(const Point&)>& fn) {
  const auto& idx = dof_nodes(mesh, bc);
  VectorXd v(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) v(static_cast<Eigen::Index>(k)) = fn(mesh.nodes[idx[k]]);
  return v;
}

namespace {

std::string where(const Point& x, int dim) {
  std::ostringstream os;
  os.precision(12);
  os << "(" << x[0];
  if (dim == 2) os << ", " << x[1];
  os << ")";
  return os.str();
}

Tensor checked_leading(const CoefficientField& field, double t, const Point& x) {
  const Tensor a = field.leading(t, x);
  if (!a.allFinite()) throw AssemblyError("assemble_operator: non-finite coefficient at " + where(x, field.dim));
  const double lam = min_symmetric_eigenvalue(a, field.dim);
  if (lam < field.alpha0 * (1.0 - 1e-9) - 1e-12) {
    throw AssemblyError("assemble_operator: ellipticity violated at " + where(x, field.dim) +
                        " (min eigenvalue " + std::to_string(lam) + " < alpha0 " + std::to_string(field.alpha0) + ")");
  }
  return a;
}

}  // namespace

Eigen::SparseMatrix<double> assemble_operator(const Mesh& mesh, const CoefficientField& field,
                                              BoundaryCondition bc, double t) {
  if (field.dim != mesh.dim) throw AssemblyError("assemble_operator: field and mesh dimensions differ");
  if (bc == BoundaryCondition::robin && !field.has_robin()) {
    throw AssemblyError("assemble_operator: Robin conditions need a robin_beta coefficient");
  }
  const double h = mesh.h;
  const int m = mesh.cells_per_unit;
  const auto n = static_cast<Eigen::Index>(mesh.size());
  using Trip = Eigen::Triplet<double>;
  std::vector<Trip> form;  // symmetric-form contributions on all nodes
  form.reserve(static_cast<std::size_t>(n) * (mesh.dim == 1 ? 3 : 9));

  auto edge_pair = [&](int a, int b, double k) {
    form.emplace_back(a, a, k);
    form.emplace_back(b, b, k);
    form.emplace_back(a, b, -k);
    form.emplace_back(b, a, -k);
  };

  // Dual-cell face length for a face lying on a square boundary line.
  auto face_length = [&](int transverse) {
    if (mesh.kind == DomainKind::square && (transverse == 0 || transverse == m)) return 0.5 * h;
    return h;
  };

  for (std::size_t id = 0; id < mesh.size(); ++id) {
    const int i = mesh.coords[id][0], j = mesh.coords[id][1];
    const int a = static_cast<int>(id);
    if (mesh.dim == 1) {
      const int b = mesh.node_at(i + 1, 0);
      if (b >= 0) {
        const Point mid = 0.5 * (mesh.nodes[id] + mesh.nodes[static_cast<std::size_t>(b)]);
        edge_pair(a, b, checked_leading(field, t, mid)(0, 0) / h);
      }
      continue;
    }
    if (const int b = mesh.node_at(i + 1, j); b >= 0) {
      const Point mid = 0.5 * (mesh.nodes[id] + mesh.nodes[static_cast<std::size_t>(b)]);
      edge_pair(a, b, checked_leading(field, t, mid)(0, 0) * face_length(j) / h);
    }
    if (const int b = mesh.node_at(i, j + 1); b >= 0) {
      const Point mid = 0.5 * (mesh.nodes[id] + mesh.nodes[static_cast<std::size_t>(b)]);
      edge_pair(a, b, checked_leading(field, t, mid)(1, 1) * face_length(i) / h);
    }
    // Cross terms on the grid cell with lower-left corner (i,j).
    const int c10 = mesh.node_at(i + 1, j), c01 = mesh.node_at(i, j + 1), c11 = mesh.node_at(i + 1, j + 1);
    if (c10 >= 0 && c01 >= 0 && c11 >= 0) {
      const Point centre = mesh.nodes[id] + Point(0.5 * h, 0.5 * h);
      const Tensor A = checked_leading(field, t, centre);
      const double a12 = A(0, 1), a21 = A(1, 0);
      if (a12 != 0.0 || a21 != 0.0) {
        const int corner[4] = {a, c10, c01, c11};
        const double gx[4] = {-1.0, 1.0, -1.0, 1.0};
        const double gy[4] = {-1.0, -1.0, 1.0, 1.0};
        // h^2 * (a12 dy u dx v + a21 dx u dy v) with cell gradients (.)/(2h).
        for (int r = 0; r < 4; ++r) {
          for (int c = 0; c < 4; ++c) {
            const double k = 0.25 * (a12 * gx[r] * gy[c] + a21 * gy[r] * gx[c]);
            if (k != 0.0) form.emplace_back(corner[r], corner[c], k);
          }
        }
      }
    }
  }

  if (field.zero_order) {
    for (std::size_t id = 0; id < mesh.size(); ++id) {
      const double c0 = field.zero_order(t, mesh.nodes[id]);
      if (c0 != 0.0) form.emplace_back(static_cast<int>(id), static_cast<int>(id), c0 * mesh.cell_volumes(static_cast<Eigen::Index>(id)));
    }
  }

  if (bc == BoundaryCondition::robin) {
    for (std::size_t k = 0; k < mesh.boundary_nodes.size(); ++k) {
      const int id = mesh.boundary_nodes[k];
      const double beta = field.robin_beta(t, mesh.nodes[static_cast<std::size_t>(id)]);
      if (!(beta >= 0.0)) {
        throw AssemblyError("assemble_operator: negative Robin coefficient at " +
                            where(mesh.nodes[static_cast<std::size_t>(id)], mesh.dim));
      }
      if (beta != 0.0) form.emplace_back(id, id, beta * mesh.boundary_measure(static_cast<Eigen::Index>(k)));
    }
  }

  Eigen::SparseMatrix<double> stiffness(n, n);
  stiffness.setFromTriplets(form.begin(), form.end());

  // Restrict to unknowns and divide by the quadrature weights.
  const auto& dofs = dof_nodes(mesh, bc);
  std::vector<int> slot(mesh.size(), -1);
  for (std::size_t k = 0; k < dofs.size(); ++k) slot[static_cast<std::size_t>(dofs[k])] = static_cast<int>(k);
  std::vector<Trip> out;
  out.reserve(static_cast<std::size_t>(stiffness.nonZeros()));
  for (Eigen::Index col = 0; col < stiffness.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(stiffness, col); it; ++it) {
      const int r = slot[static_cast<std::size_t>(it.row())], c = slot[static_cast<std::size_t>(it.col())];
      if (r < 0 || c < 0) continue;
      out.emplace_back(r, c, it.value() / mesh.cell_volumes(it.row()));
    }
  }

  // Lower-order drift terms in strong form: centred differences, one-sided where
  // a neighbour is missing from the mesh.
  if (field.drift_a || field.drift_b) {
    for (std::size_t k = 0; k < dofs.size(); ++k) {
      const int id = dofs[k];
      const Point x = mesh.nodes[static_cast<std::size_t>(id)];
      const int i = mesh.coords[static_cast<std::size_t>(id)][0], j = mesh.coords[static_cast<std::size_t>(id)][1];
      for (int axis = 0; axis < mesh.dim; ++axis) {
        const int fwd = axis == 0 ? mesh.node_at(i + 1, j) : mesh.node_at(i, j + 1);
        const int bwd = axis == 0 ? mesh.node_at(i - 1, j) : mesh.node_at(i, j - 1);
        // Difference stencil d/dx_axis: list of (node, coefficient).
        std::vector<std::pair<int, double>> diff;
        if (fwd >= 0 && bwd >= 0) {
          diff = {{fwd, 0.5 / h}, {bwd, -0.5 / h}};
        } else if (fwd >= 0) {
          diff = {{fwd, 1.0 / h}, {id, -1.0 / h}};
        } else if (bwd >= 0) {
          diff = {{id, 1.0 / h}, {bwd, -1.0 / h}};
        }
        for (const auto& [node, coef] : diff) {
          const int c = slot[static_cast<std::size_t>(node)];
          if (c < 0) continue;  // Dirichlet boundary value is zero
          double value = 0.0;
          if (field.drift_a) value -= coef * field.drift_a(t, mesh.nodes[static_cast<std::size_t>(node)])[axis];
          if (field.drift_b) value += coef * field.drift_b(t, x)[axis];
          if (value != 0.0) out.emplace_back(static_cast<int>(k), c, value);
        }
      }
    }
  }

  const auto nd = static_cast<Eigen::Index>(dofs.size());
  Eigen::SparseMatrix<double> op(nd, nd);
  op.setFromTriplets(out.begin(), out.end());
  return op;
}

double gradient_norm(const Mesh& mesh, const VectorXd& nodal, double p) {
  if (static_cast<std::size_t>(nodal.size()) != mesh.size()) throw DomainError("gradient_norm: expects a node vector");
  const double h = mesh.h;
  std::vector<double> magnitudes;
  std::vector<double> volumes;
  for (std::size_t id = 0; id < mesh.size(); ++id) {
    const int i = mesh.coords[id][0], j = mesh.coords[id][1];
    if (mesh.dim == 1) {
      const int b = mesh.node_at(i + 1, 0);
      if (b < 0) continue;
      magnitudes.push_back(std::abs(nodal(b) - nodal(static_cast<Eigen::Index>(id))) / h);
      volumes.push_back(h);
      continue;
    }
    const int c10 = mesh.node_at(i + 1, j), c01 = mesh.node_at(i, j + 1), c11 = mesh.node_at(i + 1, j + 1);
    if (c10 < 0 || c01 < 0 || c11 < 0) continue;
    const double u00 = nodal(static_cast<Eigen::Index>(id)), u10 = nodal(c10), u01 = nodal(c01), u11 = nodal(c11);
    const double gx = 0.5 * ((u10 - u00) + (u11 - u01)) / h;
    const double gy = 0.5 * ((u01 - u00) + (u11 - u10)) / h;
    magnitudes.push_back(std::hypot(gx, gy));
    volumes.push_back(h * h);
  }
  if (magnitudes.empty()) return 0.0;
  const VectorXd w = Eigen::Map<VectorXd>(volumes.data(), static_cast<Eigen::Index>(volumes.size()));
  const VectorXd g = Eigen::Map<VectorXd>(magnitudes.data(), static_cast<Eigen::Index>(magnitudes.size()));
  return lp_norm(w, p, g);
}

double cutoff_bump(double r, double radius) {
  const double inner = 0.5 * radius;
  if (r <= inner) return 1.0;
  if (r >= radius) return 0.0;
  const double s = (r - inner) / (radius - inner);
  return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

VectorXd meyers_witness(const Mesh& mesh, double cutoff_radius) {
  if (mesh.kind != DomainKind::disk) throw DomainError("meyers_witness: requires a disk mesh");
  if (!(cutoff_radius > 0.0 && cutoff_radius < 1.0)) throw DomainError("meyers_witness: cutoff radius must lie in (0,1)");
  VectorXd w(static_cast<Eigen::Index>(mesh.size()));
  for (std::size_t id = 0; id < mesh.size(); ++id) {
    const Point x = mesh.nodes[id];
    const double r2 = x.squaredNorm();
    const double u = r2 == 0.0 ? 0.0 : x[0] / std::pow(r2, 0.25);
    w(static_cast<Eigen::Index>(id)) = u * cutoff_bump(std::sqrt(r2), cutoff_radius);
  }
  return w;
}

std::vector<double> time_grid(double horizon, int steps, double grading) {
  if (!(horizon > 0.0)) throw DomainError("time_grid: horizon must be positive");
  if (steps < 1) throw DomainError("time_grid: need at least one step");
  if (!(grading > 0.0)) throw DomainError("time_grid: grading exponent must be positive");
  std::vector<double> t(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    const double s = static_cast<double>(i) / steps;
    t[static_cast<std::size_t>(i)] = grading == 1.0 ? horizon * s : horizon * std::pow(s, grading);
  }
  t.back() = horizon;
  return t;
}

MatrixXd OperatorFamily::at(double t) const {
  if (generator) return generator(t);
  if (t <= times.front()) return matrices.front();
  if (t >= times.back()) return matrices.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const auto k = static_cast<std::size_t>(it - times.begin());
  const double t0 = times[k - 1], t1 = times[k];
  const double s = (t - t0) / (t1 - t0);
  return (1.0 - s) * matrices[k - 1] + s * matrices[k];
}

OperatorFamily OperatorFamily::shifted(double extra_mu) const {
  OperatorFamily out = *this;
  const auto I = MatrixXd::Identity(size(), size());
  for (auto& A : out.matrices) A += extra_mu * I;
  out.mu += extra_mu;
  if (generator) {
    auto g = generator;
    const Eigen::Index n = size();
    out.generator = [g, extra_mu, n](double t) -> MatrixXd { return g(t) + extra_mu * MatrixXd::Identity(n, n); };
  }
  return out;
}

bool OperatorFamily::autonomous() const {
  for (std::size_t i = 1; i < matrices.size(); ++i) {
    if (matrices[i] != matrices[0]) return false;
  }
  return true;
}

OperatorFamily build_family(const Mesh& mesh, const CoefficientField& field, BoundaryCondition bc,
                            const std::vector<double>& times, double p, double mu) {
  if (times.size() < 2) throw DomainError("build_family: need at least two time nodes");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw DomainError("build_family: time grid must be ascending");
  }
  OperatorFamily fam;
  fam.times = times;
  fam.weights = dof_weights(mesh, bc);
  fam.p = p;
  fam.mu = mu;
  fam.bc = bc;
  const Eigen::Index n = fam.weights.size();
  // The generator owns copies so the family outlives the mesh and field.
  auto mesh_copy = std::make_shared<Mesh>(mesh);
  auto field_copy = std::make_shared<CoefficientField>(field);
  fam.generator = [mesh_copy, field_copy, bc, mu, n](double t) -> MatrixXd {
    MatrixXd A = MatrixXd(assemble_operator(*mesh_copy, *field_copy, bc, t));
    if (mu != 0.0) A += mu * MatrixXd::Identity(n, n);
    return A;
  };
  fam.matrices.reserve(times.size());
  for (double t : times) fam.matrices.push_back(fam.generator(t));
  return fam;
}

OperatorFamily make_family(std::vector<double> times, std::function<MatrixXd(double)> generator, VectorXd weights,
                           double p) {
  if (times.size() < 2) throw DomainError("make_family: need at least two time nodes");
  OperatorFamily fam;
  fam.times = std::move(times);
  fam.weights = std::move(weights);
  fam.p = p;
  fam.generator = std::move(generator);
  for (double t : fam.times) {
    fam.matrices.push_back(fam.generator(t));
    if (fam.matrices.back().rows() != fam.weights.size() || fam.matrices.back().cols() != fam.weights.size()) {
      throw DomainError("make_family: matrix and weight sizes differ");
    }
  }
  return fam;
}

}  // namespace mrlab
