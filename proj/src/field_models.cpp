#include "mrlab/field_models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace mrlab {

std::string to_string(DomainKind kind) {
  switch (kind) {
    case DomainKind::interval:
      return "interval";
    case DomainKind::square:
      return "square";
    case DomainKind::disk:
      return "disk";
  }
  return "unknown";
}

DomainKind domain_from_string(const std::string& name) {
  if (name == "interval") return DomainKind::interval;
  if (name == "square") return DomainKind::square;
  if (name == "disk") return DomainKind::disk;
  throw DomainError("unknown domain kind '" + name + "'");
}

bool in_domain(DomainKind kind, const Point& x, double tol) {
  switch (kind) {
    case DomainKind::interval:
      return x[0] >= -tol && x[0] <= 1.0 + tol;
    case DomainKind::square:
      return x[0] >= -tol && x[0] <= 1.0 + tol && x[1] >= -tol && x[1] <= 1.0 + tol;
    case DomainKind::disk:
      return x.squaredNorm() <= (1.0 + tol) * (1.0 + tol);
  }
  return false;
}

double min_symmetric_eigenvalue(const Tensor& a, int dim) {
  if (dim == 1) return a(0, 0);
  const double p = a(0, 0), q = a(1, 1), r = 0.5 * (a(0, 1) + a(1, 0));
  return 0.5 * (p + q) - std::sqrt(0.25 * (p - q) * (p - q) + r * r);
}

namespace {

std::string describe(const Point& x, int dim) {
  std::ostringstream os;
  os.precision(17);
  if (dim == 1) {
    os << "(" << x[0] << ")";
  } else {
    os << "(" << x[0] << ", " << x[1] << ")";
  }
  return os.str();
}

double time_profile(double t, double t0, double beta) {
  const double d = std::abs(t - t0);
  return d == 0.0 ? 0.0 : std::pow(d, beta);
}

double worst_time_distance(double t0, double horizon) { return std::max(std::abs(horizon - t0), std::abs(t0)); }

}  // namespace

MatrixXd eval_matrix(const CoefficientField& field, double t, const Point& x) {
  if (!std::isfinite(t) || t < 0.0) throw DomainError("eval_matrix: time must be finite and nonnegative");
  if (!in_domain(field.domain, x)) {
    throw DomainError("eval_matrix: point " + describe(x, field.dim) + " outside " + to_string(field.domain));
  }
  if (field.singular_at && field.singular_at(x)) {
    throw SingularPointError("eval_matrix: field '" + field.name + "' is singular at " + describe(x, field.dim));
  }
  const Tensor a = field.leading(t, x);
  if (min_symmetric_eigenvalue(a, field.dim) < field.alpha0 - 1e-12) {
    throw DomainError("eval_matrix: ellipticity violated at " + describe(x, field.dim));
  }
  return a.topLeftCorner(field.dim, field.dim);
}

CoefficientField identity_field(int dim, DomainKind domain) {
  CoefficientField f = constant_field(dim, domain, Tensor::Identity());
  f.name = "identity";
  return f;
}

CoefficientField constant_field(int dim, DomainKind domain, const Tensor& a, double zero_order) {
  CoefficientField f;
  f.name = "constant";
  f.dim = dim;
  f.domain = domain;
  Tensor block = Tensor::Zero();
  block.topLeftCorner(dim, dim) = a.topLeftCorner(dim, dim);
  if (dim == 1) block(1, 1) = block(0, 0);
  f.leading = [block](double, const Point&) { return block; };
  if (zero_order != 0.0) {
    f.zero_order = [zero_order](double, const Point&) { return zero_order; };
  }
  f.alpha0 = min_symmetric_eigenvalue(block, dim);
  f.sup_bound = std::max(block.cwiseAbs().maxCoeff(), std::abs(zero_order));
  return f;
}

CoefficientField holder_blend(int dim, DomainKind domain, std::function<Tensor(const Point&)> base,
                              std::function<Tensor(const Point&)> perturbation, double alpha0,
                              double sup_base, double sup_perturbation, const HolderBlendParams& params) {
  CoefficientField f;
  f.name = "holder_blend";
  f.dim = dim;
  f.domain = domain;
  const double beta = params.beta_time, c = params.amplitude, t0 = params.t0;
  f.leading = [=](double t, const Point& x) -> Tensor {
    return base(x) + c * time_profile(t, t0, beta) * perturbation(x);
  };
  f.alpha0 = alpha0;
  f.sup_bound = sup_base + std::abs(c) * std::pow(worst_time_distance(t0, params.horizon), beta) * sup_perturbation;
  f.time_holder = HolderPair{std::abs(c) * sup_perturbation, beta};
  return f;
}

CoefficientField holder_blend(int dim, DomainKind domain, const HolderBlendParams& params) {
  auto base = [dim](const Point& x) -> Tensor {
    double s = std::sin(kPi * x[0]);
    if (dim == 2) s *= std::sin(kPi * x[1]);
    return (1.0 + 0.25 * s) * Tensor::Identity();
  };
  auto perturbation = [](const Point& x) -> Tensor { return (1.0 + 0.5 * x[0] * x[0]) * Tensor::Identity(); };
  return holder_blend(dim, domain, base, perturbation, 0.75, 1.25, 1.5, params);
}

CoefficientField meyers_field() {
  CoefficientField f;
  f.name = "meyers";
  f.dim = 2;
  f.domain = DomainKind::disk;
  f.leading = [](double, const Point& p) -> Tensor {
    const double x = p[0], y = p[1];
    const double r2 = x * x + y * y;
    Tensor a;
    a << 4.0 * x * x + y * y, 4.0 * x * y, 4.0 * x * y, x * x + 4.0 * y * y;
    return a / (4.0 * r2);
  };
  f.singular_at = [](const Point& p) { return p.squaredNorm() == 0.0; };
  // Eigenvalues range over [1/8, 9/8]; the extremes sit on the diagonals.
  f.alpha0 = 0.125;
  f.sup_bound = 1.125;
  return f;
}

namespace {

// Mollified square wave: +1 on even cells, -1 on odd cells, linear ramps of
// half-width `width` across cell boundaries.
double square_wave(double x, double cell, double width) {
  const double xi = x / cell;
  const double k = std::floor(xi);
  const double frac = (xi - k) * cell;
  const double dist = std::min(frac, cell - frac);  // distance to nearest boundary
  const double sign = (static_cast<long long>(k) % 2 == 0) ? 1.0 : -1.0;
  if (width <= 0.0) return sign;
  // Near a boundary the neighbouring cell has the opposite sign, so the ramp is
  // centred on the boundary itself.
  return sign * std::min(1.0, dist / width);
}

}  // namespace

CoefficientField checkerboard_field(const CheckerboardParams& params) {
  if (params.cell <= 0.0) throw DomainError("checkerboard_field: cell size must be positive");
  if (params.low <= 0.0 || params.high < params.low) throw DomainError("checkerboard_field: need 0 < low <= high");
  CoefficientField f;
  f.name = "checkerboard";
  f.dim = 2;
  f.domain = DomainKind::square;
  const CheckerboardParams p = params;
  f.leading = [p](double t, const Point& x) -> Tensor {
    const double pattern = square_wave(x[0], p.cell, p.mollify_width) * square_wave(x[1], p.cell, p.mollify_width);
    const double a = p.low + (p.high - p.low) * 0.5 * (1.0 + pattern);
    return (a + p.amplitude * time_profile(t, p.t0, p.beta_time)) * Tensor::Identity();
  };
  f.alpha0 = p.low + std::min(0.0, p.amplitude) * std::pow(worst_time_distance(p.t0, p.horizon), p.beta_time);
  f.sup_bound = p.high + std::abs(p.amplitude) * std::pow(worst_time_distance(p.t0, p.horizon), p.beta_time);
  if (p.amplitude != 0.0) f.time_holder = HolderPair{std::abs(p.amplitude), p.beta_time};
  return f;
}

CoefficientField robin_field(int dim, DomainKind domain, const RobinParams& params) {
  if (params.beta0 < 0.0 || params.amplitude < 0.0 || params.lipschitz_slope < -0.5) {
    throw DomainError("robin_field: parameters must keep beta nonnegative");
  }
  CoefficientField f = identity_field(dim, domain);
  f.name = "robin";
  f.zero_order = [](double, const Point&) { return 1.0; };
  const RobinParams p = params;
  f.robin_beta = [p](double t, const Point& x) {
    return p.beta0 + p.amplitude * time_profile(t, p.t0, p.alpha_time) * (1.0 + p.lipschitz_slope * x[0]);
  };
  const double spatial = 1.0 + std::abs(p.lipschitz_slope);
  f.sup_bound = std::max(1.0, p.beta0 + p.amplitude * std::pow(worst_time_distance(p.t0, p.horizon), p.alpha_time) * spatial);
  if (p.amplitude > 0.0) f.time_holder = HolderPair{p.amplitude * spatial, p.alpha_time};
  return f;
}

CoefficientField drift_field(int dim, DomainKind domain, const DriftParams& params) {
  CoefficientField f = identity_field(dim, domain);
  f.name = "drift";
  const DriftParams p = params;
  if (p.amplitude != 0.0) {
    f.leading = [p](double t, const Point&) -> Tensor {
      return (1.0 + p.amplitude * time_profile(t, p.t0, p.beta_time)) * Tensor::Identity();
    };
    f.time_holder = HolderPair{std::abs(p.amplitude), p.beta_time};
    if (p.amplitude < 0.0) f.alpha0 = 1.0 + p.amplitude * std::pow(worst_time_distance(p.t0, p.horizon), p.beta_time);
  }
  f.drift_a = [p](double, const Point&) { return p.a; };
  f.drift_b = [p](double, const Point&) { return p.b; };
  if (p.zero_order != 0.0) f.zero_order = [p](double, const Point&) { return p.zero_order; };
  f.sup_bound = std::max({1.0 + std::abs(p.amplitude) * std::pow(worst_time_distance(p.t0, p.horizon), p.beta_time),
                          p.a.cwiseAbs().maxCoeff(), p.b.cwiseAbs().maxCoeff(), std::abs(p.zero_order)});
  return f;
}

// --- vmo modulus ----------------------------------------------------------

VmoProfile vmo_modulus(const CoefficientField& field, double t, const std::vector<double>& radii,
                       const VmoOptions& options) {
  if (radii.empty()) throw DomainError("vmo_modulus: empty radius list");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw DomainError("vmo_modulus: radii must be positive");
    if (i > 0 && radii[i] <= radii[i - 1]) throw DomainError("vmo_modulus: radii must be ascending");
  }
  if (options.sample_density < 2) throw DomainError("vmo_modulus: sample density too small");

  const int dim = field.dim;
  const bool disk = field.domain == DomainKind::disk;
  const double origin = disk ? -1.0 : 0.0;
  const int n = options.sample_density * (disk ? 2 : 1);
  const double spacing = 1.0 / options.sample_density;
  const int ny = dim == 2 ? n : 1;

  auto region = options.region;
  if (!region) {
    region = [&field](const Point& x) {
      return in_domain(field.domain, x) && !(field.singular_at && field.singular_at(x));
    };
  }

  auto coordinate = [&](int i) { return origin + (i + 0.5) * spacing; };
  const int components = dim == 2 ? 4 : 1;
  std::vector<std::vector<double>> values(components, std::vector<double>(static_cast<std::size_t>(n) * ny, 0.0));
  std::vector<int> inside(static_cast<std::size_t>(n) * ny, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < ny; ++j) {
      const Point x(coordinate(i), dim == 2 ? coordinate(j) : 0.0);
      const std::size_t idx = static_cast<std::size_t>(i) * ny + j;
      if (!region(x)) continue;
      inside[idx] = 1;
      const Tensor a = field.leading(t, x);
      if (dim == 1) {
        values[0][idx] = a(0, 0);
      } else {
        values[0][idx] = a(0, 0);
        values[1][idx] = a(0, 1);
        values[2][idx] = a(1, 0);
        values[3][idx] = a(1, 1);
      }
    }
  }

  // Prefix counts of the region mask for O(1) window containment tests.
  std::vector<long long> mask_sum(static_cast<std::size_t>(n + 1) * (ny + 1), 0);
  auto ms = [&](int i, int j) -> long long& { return mask_sum[static_cast<std::size_t>(i) * (ny + 1) + j]; };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < ny; ++j) {
      ms(i + 1, j + 1) = ms(i, j + 1) + ms(i + 1, j) - ms(i, j) + inside[static_cast<std::size_t>(i) * ny + j];
    }
  }

  VmoProfile profile;
  profile.radii = radii;
  profile.field_id = field.name;
  double running = 0.0;
  for (double rho : radii) {
    const double side = dim == 2 ? std::sqrt(2.0) * rho : 2.0 * rho;
    const int k = static_cast<int>(std::floor(side / spacing + 1e-9));
    if (k < 2) throw DomainError("vmo_modulus: sample density too coarse for radius " + std::to_string(rho));
    const int ky = dim == 2 ? k : 1;
    if (k > n || ky > ny) throw DomainError("vmo_modulus: radius " + std::to_string(rho) + " exceeds the domain");
    const int stride = std::max(1, static_cast<int>(k * options.stride_fraction));
    const long long full = static_cast<long long>(k) * ky;
    double osc = 0.0;
    bool any = false;
    for (int i0 = 0; i0 + k <= n; i0 += stride) {
      for (int j0 = 0; j0 + ky <= ny; j0 += (dim == 2 ? stride : 1)) {
        const long long count = ms(i0 + k, j0 + ky) - ms(i0, j0 + ky) - ms(i0 + k, j0) + ms(i0, j0);
        if (count != full) continue;
        any = true;
        for (int c = 0; c < components; ++c) {
          const auto& v = values[c];
          double mean = 0.0;
          for (int i = i0; i < i0 + k; ++i)
            for (int j = j0; j < j0 + ky; ++j) mean += v[static_cast<std::size_t>(i) * ny + j];
          mean /= static_cast<double>(full);
          double dev = 0.0;
          for (int i = i0; i < i0 + k; ++i)
            for (int j = j0; j < j0 + ky; ++j) dev += std::abs(v[static_cast<std::size_t>(i) * ny + j] - mean);
          osc = std::max(osc, dev / static_cast<double>(full));
        }
      }
    }
    if (!any) throw DomainError("vmo_modulus: no ball of radius " + std::to_string(rho) + " fits in the region");
    running = std::max(running, osc);
    profile.eta.push_back(running);
  }
  return profile;
}

// --- time Hölder fit ------------------------------------------------------

namespace {

std::vector<Point> interior_samples(const CoefficientField& field, int per_axis) {
  std::vector<Point> pts;
  const bool disk = field.domain == DomainKind::disk;
  const double lo = disk ? -1.0 : 0.0;
  const double span = disk ? 2.0 : 1.0;
  const int m = std::max(per_axis, 2);
  for (int i = 0; i < m; ++i) {
    const double x = lo + span * i / (m - 1);
    if (field.dim == 1) {
      pts.emplace_back(x, 0.0);
      continue;
    }
    for (int j = 0; j < m; ++j) {
      const Point p(x, lo + span * j / (m - 1));
      if (!in_domain(field.domain, p)) continue;
      pts.push_back(p);
    }
  }
  std::erase_if(pts, [&](const Point& p) { return field.singular_at && field.singular_at(p); });
  return pts;
}

std::vector<Point> boundary_samples(const CoefficientField& field, int per_axis) {
  std::vector<Point> pts;
  switch (field.domain) {
    case DomainKind::interval:
      pts = {Point(0.0, 0.0), Point(1.0, 0.0)};
      break;
    case DomainKind::square:
      for (int i = 0; i < per_axis; ++i) {
        const double s = static_cast<double>(i) / (per_axis - 1);
        pts.insert(pts.end(), {Point(s, 0.0), Point(s, 1.0), Point(0.0, s), Point(1.0, s)});
      }
      break;
    case DomainKind::disk:
      for (int i = 0; i < 4 * per_axis; ++i) {
        const double th = 2.0 * kPi * i / (4 * per_axis);
        pts.emplace_back(std::cos(th), std::sin(th));
      }
      break;
  }
  return pts;
}

std::vector<double> coefficient_snapshot(const CoefficientField& field, double t, const std::vector<Point>& interior,
                                         const std::vector<Point>& boundary) {
  std::vector<double> v;
  for (const Point& x : interior) {
    const Tensor a = field.leading(t, x);
    for (int i = 0; i < field.dim; ++i)
      for (int j = 0; j < field.dim; ++j) v.push_back(a(i, j));
    if (field.drift_a) {
      const Point d = field.drift_a(t, x);
      for (int i = 0; i < field.dim; ++i) v.push_back(d[i]);
    }
    if (field.drift_b) {
      const Point d = field.drift_b(t, x);
      for (int i = 0; i < field.dim; ++i) v.push_back(d[i]);
    }
    if (field.zero_order) v.push_back(field.zero_order(t, x));
  }
  if (field.robin_beta) {
    for (const Point& x : boundary) v.push_back(field.robin_beta(t, x));
  }
  return v;
}

}  // namespace

HolderFitResult time_holder_fit(const CoefficientField& field, const std::vector<double>& time_samples,
                                int spatial_samples_per_axis) {
  std::vector<double> times = time_samples;
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  if (times.size() < 2) throw DomainError("time_holder_fit: need at least two distinct times");
  const double span = times.back() - times.front();
  const double min_sep = 1e-4 * span;

  const auto interior = interior_samples(field, spatial_samples_per_axis);
  const auto boundary = boundary_samples(field, spatial_samples_per_axis);
  std::vector<std::vector<double>> snaps;
  snaps.reserve(times.size());
  for (double t : times) snaps.push_back(coefficient_snapshot(field, t, interior, boundary));

  // Largest defect per separation, keyed on the separation rounded to 1e-9 span.
  std::map<long long, std::pair<double, double>> modulus;
  int pairs = 0;
  double scale = 0.0;
  for (const auto& s : snaps)
    for (double v : s) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < times.size(); ++i) {
    for (std::size_t j = i + 1; j < times.size(); ++j) {
      const double sep = times[j] - times[i];
      if (sep < min_sep) continue;
      ++pairs;
      double d = 0.0;
      for (std::size_t k = 0; k < snaps[i].size(); ++k) d = std::max(d, std::abs(snaps[i][k] - snaps[j][k]));
      const long long key = std::llround(sep / (1e-9 * span));
      auto [it, inserted] = modulus.try_emplace(key, sep, d);
      if (!inserted) it->second.second = std::max(it->second.second, d);
    }
  }
  if (pairs < 8) throw DomainError("time_holder_fit: need at least 8 time pairs");

  std::vector<double> lx, ly;
  for (const auto& [key, sd] : modulus) {
    if (sd.second > 1e-14 * std::max(scale, 1.0)) {
      lx.push_back(std::log(sd.first));
      ly.push_back(std::log(sd.second));
    }
  }
  HolderFitResult result;
  result.separations = static_cast<int>(lx.size());
  if (lx.size() < 2) {
    result.constant_in_time = true;
    return result;
  }
  const LinearFit fit = least_squares_line(lx, ly);
  result.exponent = fit.slope;
  result.constant = std::exp(fit.intercept);
  result.r2 = fit.r2;
  return result;
}

}  // namespace mrlab
