#include "mrlab/lab.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <Eigen/SparseLU>

namespace mrlab::lab {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

const std::vector<double> kDefaultMuGrid{0.0, 1.0, 4.0, 16.0, 64.0, 256.0, 1024.0};
constexpr double kAutoShiftTarget = 0.5;
constexpr Eigen::Index kDenseLimit = 2500;

// --- config helpers --------------------------------------------------------

void require_object(const Json& v, const std::string& where) {
  if (!v.is_object()) throw ConfigError(where + ": expected an object");
}

void allow_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  require_object(obj, where);
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

double number_at(const Json& obj, const std::string& key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(where + "." + key + ": must be finite");
  return x;
}

long long integer_at(const Json& obj, const std::string& key, long long fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return v.get<long long>();
}

std::string string_at(const Json& obj, const std::string& key, const std::string& fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> list_at(const Json& obj, const std::string& key, std::vector<double> fallback,
                            const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(where + "." + key + ": expected an array of numbers");
  std::vector<double> out;
  for (const Json& e : v) {
    if (!e.is_number()) throw ConfigError(where + "." + key + ": expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

// Parameter access inside checks; types were validated up front.
double num(const Json& p, const char* key, double fallback) { return p.contains(key) ? p.at(key).get<double>() : fallback; }
long long integer(const Json& p, const char* key, long long fallback) {
  return p.contains(key) ? p.at(key).get<long long>() : fallback;
}
bool flag(const Json& p, const char* key, bool fallback) { return p.contains(key) ? p.at(key).get<bool>() : fallback; }
std::string str(const Json& p, const char* key, const std::string& fallback) {
  return p.contains(key) ? p.at(key).get<std::string>() : fallback;
}
std::vector<double> list(const Json& p, const char* key, std::vector<double> fallback) {
  return p.contains(key) ? p.at(key).get<std::vector<double>>() : fallback;
}

// Allowed values of string parameters, shared by every check.
const std::map<std::string, std::set<std::string>>& string_choices() {
  static const std::map<std::string, std::set<std::string>> choices{
      {"u0", {"zero", "one", "sin", "cos"}},
      {"f", {"zero", "one", "sin", "cos"}},
      {"f_time", {"const", "cos", "sin"}},
      {"strategy", {"direct", "neumann"}},
      {"envelope", {"analytic", "lattice"}},
      {"expect", {"none", "stable", "growth"}},
  };
  return choices;
}

Json bounds_json(const NormBounds& b) { return Json{{"lower", b.lower}, {"upper", b.upper}}; }
Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

std::vector<double> default_refinements(const Scenario& sc) {
  if (!sc.domain.refinements.empty()) return sc.domain.refinements;
  return {1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0};
}

// --- data profiles ---------------------------------------------------------

std::function<double(const Point&)> spatial_profile(const std::string& name, DomainKind kind) {
  if (name == "zero") return [](const Point&) { return 0.0; };
  if (name == "one") return [](const Point&) { return 1.0; };
  if (name == "cos") return [](const Point& x) { return std::cos(kPi * x[0]); };
  if (name == "sin") {
    switch (kind) {
      case DomainKind::interval:
        return [](const Point& x) { return std::sin(kPi * x[0]); };
      case DomainKind::square:
        return [](const Point& x) { return std::sin(kPi * x[0]) * std::sin(kPi * x[1]); };
      case DomainKind::disk:
        return [](const Point& x) { return std::cos(0.5 * kPi * std::min(1.0, x.norm())); };
    }
  }
  throw ConfigError("unknown data profile '" + name + "'");
}

std::function<double(double)> time_profile(const std::string& name) {
  if (name == "const") return [](double) { return 1.0; };
  if (name == "cos") return [](double t) { return std::cos(kPi * t); };
  if (name == "sin") return [](double t) { return std::sin(kPi * t); };
  throw ConfigError("unknown time profile '" + name + "'");
}

// Random smooth function vanishing on the boundary of the reference domain.
std::function<double(const Point&)> random_smooth(DomainKind kind, Rng rng) {
  constexpr int kModes = 3;
  std::vector<double> c(kModes * kModes);
  for (int k = 0; k < kModes; ++k)
    for (int l = 0; l < kModes; ++l) c[k * kModes + l] = rng.normal() / ((k + 1) * (k + 1) + (l + 1) * (l + 1));
  switch (kind) {
    case DomainKind::interval:
      return [c](const Point& x) {
        double v = 0.0;
        for (int k = 0; k < kModes; ++k) v += c[k * kModes] * std::sin((k + 1) * kPi * x[0]);
        return v;
      };
    case DomainKind::square:
      return [c](const Point& x) {
        double v = 0.0;
        for (int k = 0; k < kModes; ++k)
          for (int l = 0; l < kModes; ++l)
            v += c[k * kModes + l] * std::sin((k + 1) * kPi * x[0]) * std::sin((l + 1) * kPi * x[1]);
        return v;
      };
    case DomainKind::disk:
      return [c](const Point& x) {
        const double r = x.norm();
        const double poly = c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[1] + c[4] * (x[0] * x[0] - x[1] * x[1]);
        return std::cos(0.5 * kPi * std::min(1.0, r)) * poly;
      };
  }
  return {};
}

Trajectory forcing(const OperatorFamily& family, const Mesh& mesh, const std::string& space_name,
                   const std::string& time_name) {
  const VectorXd g = sample(mesh, family.bc, spatial_profile(space_name, mesh.kind));
  const auto tp = time_profile(time_name);
  return sample_in_time(family, [&](double t) { return VectorXd(tp(t) * g); });
}

double relative_sup_error(const Trajectory& a, const Trajectory& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, (a[i] - b[i]).cwiseAbs().maxCoeff());
    den = std::max(den, b[i].cwiseAbs().maxCoeff());
  }
  return den > 0.0 ? num / den : num;
}

double relative_variation(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo > 0.0 ? (*hi - *lo) / *lo : std::numeric_limits<double>::infinity();
}

Cell opt_cell(const std::optional<double>& v) { return v ? Cell(*v) : Cell(std::monostate{}); }

OperatorFamily with_shift(const OperatorFamily& base, const std::optional<double>& mu, double q, double p,
                          std::uint64_t seed, double* mu_out) {
  double m = 0.0;
  if (mu) {
    m = *mu;
  } else {
    QNormOptions qo;
    qo.seed = seed;
    m = shift_search(base, kDefaultMuGrid, kAutoShiftTarget, q, p, qo).mu_star;
  }
  if (mu_out) *mu_out = m;
  return m == 0.0 ? base : base.shifted(m);
}

}  // namespace

// --- scenario --------------------------------------------------------------

CoefficientField make_field(const FieldSpec& spec, int dim, DomainKind domain, double horizon) {
  const Json& p = spec.params;
  const std::string where = "field.params";
  try {
    if (spec.family == "identity") {
      allow_keys(p, {}, where);
      return identity_field(dim, domain);
    }
    if (spec.family == "constant") {
      allow_keys(p, {"a", "zero_order"}, where);
      Tensor a = Tensor::Identity();
      if (p.contains("a")) {
        if (p.at("a").is_number()) {
          a *= p.at("a").get<double>();
        } else {
          const auto v = list_at(p, "a", {}, where);
          if (v.size() != 4) throw ConfigError(where + ".a: expected a number or 4 entries (row major)");
          a << v[0], v[1], v[2], v[3];
        }
      }
      return constant_field(dim, domain, a, number_at(p, "zero_order", 0.0, where));
    }
    if (spec.family == "holder_blend") {
      allow_keys(p, {"beta_time", "amplitude", "t0"}, where);
      HolderBlendParams hp;
      hp.beta_time = number_at(p, "beta_time", hp.beta_time, where);
      hp.amplitude = number_at(p, "amplitude", hp.amplitude, where);
      hp.t0 = number_at(p, "t0", hp.t0, where);
      hp.horizon = horizon;
      return holder_blend(dim, domain, hp);
    }
    if (spec.family == "meyers") {
      allow_keys(p, {}, where);
      if (domain != DomainKind::disk) throw ConfigError("the meyers field lives on the disk domain");
      return meyers_field();
    }
    if (spec.family == "checkerboard") {
      allow_keys(p, {"cell", "low", "high", "mollify_width", "beta_time", "amplitude", "t0"}, where);
      if (domain != DomainKind::square) throw ConfigError("the checkerboard field lives on the square domain");
      CheckerboardParams cp;
      cp.cell = number_at(p, "cell", cp.cell, where);
      cp.low = number_at(p, "low", cp.low, where);
      cp.high = number_at(p, "high", cp.high, where);
      cp.mollify_width = number_at(p, "mollify_width", cp.mollify_width, where);
      cp.beta_time = number_at(p, "beta_time", cp.beta_time, where);
      cp.amplitude = number_at(p, "amplitude", cp.amplitude, where);
      cp.t0 = number_at(p, "t0", cp.t0, where);
      cp.horizon = horizon;
      return checkerboard_field(cp);
    }
    if (spec.family == "robin") {
      allow_keys(p, {"alpha_time", "beta0", "amplitude", "t0", "lipschitz_slope"}, where);
      RobinParams rp;
      rp.alpha_time = number_at(p, "alpha_time", rp.alpha_time, where);
      rp.beta0 = number_at(p, "beta0", rp.beta0, where);
      rp.amplitude = number_at(p, "amplitude", rp.amplitude, where);
      rp.t0 = number_at(p, "t0", rp.t0, where);
      rp.lipschitz_slope = number_at(p, "lipschitz_slope", rp.lipschitz_slope, where);
      rp.horizon = horizon;
      return robin_field(dim, domain, rp);
    }
    if (spec.family == "drift") {
      allow_keys(p, {"a", "b", "zero_order", "beta_time", "amplitude", "t0"}, where);
      DriftParams dp;
      const auto a = list_at(p, "a", {dp.a[0], dp.a[1]}, where);
      const auto b = list_at(p, "b", {dp.b[0], dp.b[1]}, where);
      if (a.size() != 2 || b.size() != 2) throw ConfigError(where + ": drift vectors need two entries");
      dp.a = Point(a[0], a[1]);
      dp.b = Point(b[0], b[1]);
      dp.zero_order = number_at(p, "zero_order", dp.zero_order, where);
      dp.beta_time = number_at(p, "beta_time", dp.beta_time, where);
      dp.amplitude = number_at(p, "amplitude", dp.amplitude, where);
      dp.t0 = number_at(p, "t0", dp.t0, where);
      dp.horizon = horizon;
      return drift_field(dim, domain, dp);
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("field: ") + e.what());
  }
  throw ConfigError("field.family: unknown family '" + spec.family + "'");
}

void validate_params(const std::string& check, const Json& params) {
  const auto& reg = check_registry();
  const auto it = reg.find(check);
  if (it == reg.end()) throw ConfigError("unknown check '" + check + "'");
  const std::string where = "checks." + check + ".params";
  require_object(params, where);
  for (auto p = params.begin(); p != params.end(); ++p) {
    const auto spec = std::find_if(it->second.params.begin(), it->second.params.end(),
                                   [&](const auto& e) { return e.first == p.key(); });
    if (spec == it->second.params.end()) throw ConfigError(where + ": unknown key '" + p.key() + "'");
    const Json& v = p.value();
    bool ok = false;
    switch (spec->second) {
      case ParamKind::number:
        ok = v.is_number() && std::isfinite(v.get<double>());
        break;
      case ParamKind::integer:
        ok = v.is_number_integer();
        break;
      case ParamKind::boolean:
        ok = v.is_boolean();
        break;
      case ParamKind::string:
        ok = v.is_string();
        break;
      case ParamKind::number_list:
        ok = v.is_array() && !v.empty() && std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_number(); });
        break;
    }
    if (!ok) throw ConfigError(where + "." + p.key() + ": wrong type");
    const auto choice = string_choices().find(p.key());
    if (choice != string_choices().end() && !choice->second.count(v.get<std::string>()))
      throw ConfigError(where + "." + p.key() + ": unsupported value '" + v.get<std::string>() + "'");
  }
}

Scenario parse_scenario(const Json& doc) {
  allow_keys(doc, {"version", "domain", "field", "bc", "time", "exponents", "shift", "checks", "seed", "out_dir"},
             "scenario");
  Scenario sc;
  sc.source = doc;
  sc.version = string_at(doc, "version", "", "scenario");
  if (sc.version != kSchemaVersion)
    throw ConfigError("scenario.version: expected '" + std::string(kSchemaVersion) + "', got '" + sc.version + "'");

  if (doc.contains("domain")) {
    const Json& d = doc.at("domain");
    allow_keys(d, {"kind", "h", "refinements"}, "domain");
    try {
      sc.domain.kind = domain_from_string(string_at(d, "kind", "interval", "domain"));
    } catch (const DomainError& e) {
      throw ConfigError(std::string("domain.kind: ") + e.what());
    }
    sc.domain.h = number_at(d, "h", sc.domain.h, "domain");
    sc.domain.refinements = list_at(d, "refinements", {}, "domain");
    for (double h : sc.domain.refinements)
      if (!(h > 0.0 && h <= 0.5)) throw ConfigError("domain.refinements: mesh widths must lie in (0, 1/2]");
  }
  if (!(sc.domain.h > 0.0 && sc.domain.h <= 0.5)) throw ConfigError("domain.h: must lie in (0, 1/2]");

  if (doc.contains("time")) {
    const Json& t = doc.at("time");
    allow_keys(t, {"T", "steps", "grading"}, "time");
    sc.time.T = number_at(t, "T", sc.time.T, "time");
    sc.time.steps = static_cast<int>(integer_at(t, "steps", sc.time.steps, "time"));
    sc.time.grading = number_at(t, "grading", sc.time.grading, "time");
  }
  if (!(sc.time.T > 0.0)) throw ConfigError("time.T: must be positive");
  if (sc.time.steps < 2) throw ConfigError("time.steps: at least 2 steps required");
  if (!(sc.time.grading > 0.0)) throw ConfigError("time.grading: must be positive");

  if (doc.contains("field")) {
    const Json& f = doc.at("field");
    allow_keys(f, {"family", "params"}, "field");
    sc.field.family = string_at(f, "family", sc.field.family, "field");
    if (f.contains("params")) sc.field.params = f.at("params");
  }
  const CoefficientField probe =
      make_field(sc.field, dimension_of(sc.domain.kind), sc.domain.kind, sc.time.T);

  try {
    sc.bc = bc_from_string(string_at(doc, "bc", "dirichlet", "scenario"));
  } catch (const DomainError& e) {
    throw ConfigError(std::string("bc: ") + e.what());
  }
  if (sc.bc == BoundaryCondition::robin && !probe.has_robin())
    throw ConfigError("bc: robin conditions need a field with a boundary coefficient (family 'robin')");

  if (doc.contains("exponents")) {
    const Json& e = doc.at("exponents");
    allow_keys(e, {"p", "q"}, "exponents");
    sc.p = number_at(e, "p", sc.p, "exponents");
    sc.q = number_at(e, "q", sc.q, "exponents");
  }
  if (!(sc.p > 1.0) || !(sc.q > 1.0)) throw ConfigError("exponents: p and q must lie in (1, inf)");

  sc.shift = 0.0;
  if (doc.contains("shift")) {
    const Json& s = doc.at("shift");
    if (s.is_string() && s.get<std::string>() == "auto") {
      sc.shift.reset();
    } else if (s.is_number() && s.get<double>() >= 0.0) {
      sc.shift = s.get<double>();
    } else {
      throw ConfigError("shift: expected a nonnegative number or \"auto\"");
    }
  }

  if (doc.contains("checks")) {
    const Json& c = doc.at("checks");
    if (!c.is_array()) throw ConfigError("checks: expected an array");
    for (const Json& entry : c) {
      CheckSpec cs;
      if (entry.is_string()) {
        cs.name = entry.get<std::string>();
      } else {
        allow_keys(entry, {"name", "params"}, "checks[]");
        cs.name = string_at(entry, "name", "", "checks[]");
        if (entry.contains("params")) cs.params = entry.at("params");
      }
      if (!check_registered(cs.name)) throw ConfigError("checks: unknown check '" + cs.name + "'");
      validate_params(cs.name, cs.params);
      sc.checks.push_back(std::move(cs));
    }
  }

  if (doc.contains("seed")) {
    const Json& s = doc.at("seed");
    if (!s.is_number_integer() || s.get<long long>() < 0) throw ConfigError("seed: expected a nonnegative integer");
    sc.seed = s.get<std::uint64_t>();
  }
  sc.out_dir = string_at(doc, "out_dir", sc.out_dir, "scenario");
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("scenario is not valid JSON: " + std::string(e.what()));
  }
  return parse_scenario(doc);
}

// --- tables ----------------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw DomainError("Table::add: row width does not match the header");
  rows.push_back(std::move(row));
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string cell_text(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return "";
        else if constexpr (std::is_same_v<T, double>) return format_double(v);
        else if constexpr (std::is_same_v<T, long long>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else return v;
      },
      c);
}

Json cell_json(const Cell& c) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return nullptr;
        else return v;
      },
      c);
}

}  // namespace

std::string Table::to_csv() const {
  std::string out;
  for (std::size_t k = 0; k < columns.size(); ++k) out += (k ? "," : "") + csv_field(columns[k]);
  out += "\r\n";
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + csv_field(cell_text(row[k]));
    out += "\r\n";
  }
  return out;
}

Json Table::to_json() const {
  Json rs = Json::array();
  for (const auto& row : rows) {
    Json r = Json::array();
    for (const auto& c : row) r.push_back(cell_json(c));
    rs.push_back(std::move(r));
  }
  return Json{{"columns", columns}, {"rows", std::move(rs)}};
}

std::optional<double> Table::number(std::size_t row, const std::string& column) const {
  const auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end() || row >= rows.size()) return std::nullopt;
  const Cell& c = rows[row][static_cast<std::size_t>(it - columns.begin())];
  if (const double* d = std::get_if<double>(&c)) return *d;
  if (const long long* i = std::get_if<long long>(&c)) return static_cast<double>(*i);
  return std::nullopt;
}

std::string to_string(Status s) {
  switch (s) {
    case Status::pass:
      return "pass";
    case Status::fail:
      return "fail";
    case Status::indeterminate:
      return "indeterminate";
    case Status::error:
      return "error";
  }
  return "error";
}

// --- context ---------------------------------------------------------------

class Context {
 public:
  Context(const Scenario& sc, std::uint64_t seed, int workers, bool timings)
      : sc_(sc), seed_(seed), workers_(workers), timings_(timings) {}

  const Scenario& scenario() const { return sc_; }
  std::uint64_t seed() const { return seed_; }
  int workers() const { return workers_; }
  bool timings() const { return timings_; }

  const Mesh& mesh() {
    if (!mesh_) mesh_ = build_mesh(sc_.domain.kind, sc_.domain.h);
    return *mesh_;
  }

  const CoefficientField& field() {
    if (!field_) field_ = make_field(sc_.field, dimension_of(sc_.domain.kind), sc_.domain.kind, sc_.time.T);
    return *field_;
  }

  OperatorFamily unshifted_family(int steps) {
    const auto n = static_cast<Eigen::Index>(dof_nodes(mesh(), sc_.bc).size());
    if (n > kDenseLimit)
      throw ResourceError("dense operator family with " + std::to_string(n) + " unknowns exceeds the limit of " +
                          std::to_string(kDenseLimit));
    return build_family(mesh(), field(), sc_.bc, time_grid(sc_.time.T, steps, sc_.time.grading), sc_.p);
  }

  double mu() {
    if (!mu_) {
      if (sc_.shift) {
        mu_ = *sc_.shift;
      } else {
        QNormOptions qo;
        qo.seed = seed_;
        const ShiftSearchResult r = shift_search(unshifted_family(sc_.time.steps), kDefaultMuGrid, kAutoShiftTarget,
                                                 sc_.q, sc_.p, qo);
        mu_ = r.mu_star;
        Json table = Json::array();
        for (const auto& [m, qn] : r.table) table.push_back(Json::array({m, qn}));
        shift_info_ = Json{{"target", kAutoShiftTarget}, {"table", table}};
      }
    }
    return *mu_;
  }

  /// The scenario family with the resolved shift applied.
  OperatorFamily family(int steps) {
    const double m = mu();
    OperatorFamily f = unshifted_family(steps);
    return m == 0.0 ? f : f.shifted(m);
  }

  const OperatorFamily& family() {
    if (!family_) family_ = family(sc_.time.steps);
    return *family_;
  }

  Json provenance() const {
    Json p{{"domain", to_string(sc_.domain.kind)},
           {"h", sc_.domain.h},
           {"bc", to_string(sc_.bc)},
           {"T", sc_.time.T},
           {"steps", sc_.time.steps},
           {"grading", sc_.time.grading},
           {"p", sc_.p},
           {"q", sc_.q},
           {"seed", seed_}};
    if (mu_) p["mu"] = *mu_;
    if (!shift_info_.is_null()) p["auto_shift"] = shift_info_;
    return p;
  }

 private:
  const Scenario& sc_;
  std::uint64_t seed_;
  int workers_;
  bool timings_;
  std::optional<Mesh> mesh_;
  std::optional<CoefficientField> field_;
  std::optional<OperatorFamily> family_;
  std::optional<double> mu_;
  Json shift_info_;
};

// --- checks ----------------------------------------------------------------

namespace {

CheckResult check_sector(Context& ctx, const Json& p) {
  CheckResult r;
  const OperatorFamily& fam = ctx.family();
  const double phi = num(p, "phi", kPi / 2.0);
  LambdaGrid grid;
  grid.per_decade = static_cast<int>(integer(p, "per_decade", grid.per_decade));
  grid.angle_offset = num(p, "offset", grid.angle_offset);
  r.provenance = Json{{"phi", phi}, {"per_decade", grid.per_decade}, {"offset", grid.angle_offset}};
  try {
    const SectorReport rep = sector_verify(fam, phi, grid);
    r.payload = Json{{"phi", rep.phi},
                     {"constant", bounds_json(rep.constant)},
                     {"constant_one_plus", bounds_json(rep.constant_one_plus)},
                     {"spectrum_margin", rep.spectrum_margin},
                     {"samples", rep.samples},
                     {"witness", complex_json(rep.witness)}};
    r.status = std::isfinite(rep.constant_one_plus.upper) ? Status::pass : Status::fail;
  } catch (const NotSectorialError& e) {
    r.status = Status::fail;
    r.message = e.what();
  }
  return r;
}

MRSolveResult solve_with(const NacpProblem& pr, const std::string& strategy, bool estimate) {
  if (strategy == "neumann") return solve_at(pr, Neumann{}, true);
  return solve_at(pr, DirectBlock{}, estimate);
}

CheckResult check_solve_at(Context& ctx, const Json& p) {
  CheckResult r;
  const OperatorFamily& fam = ctx.family();
  const std::string u0 = str(p, "u0", "sin"), f = str(p, "f", "one"), ft = str(p, "f_time", "const");
  const std::string strategy = str(p, "strategy", "direct");
  NacpProblem pr{fam, sample(ctx.mesh(), fam.bc, spatial_profile(u0, ctx.mesh().kind)),
                 forcing(fam, ctx.mesh(), f, ft), ctx.scenario().p, ctx.scenario().q};
  MRSolveResult res = solve_with(pr, strategy, flag(p, "estimate_q", false));
  r.provenance = Json{{"u0", u0}, {"f", f}, {"f_time", ft}, {"strategy", strategy}};
  double u_max = 0.0;
  for (const VectorXd& v : res.u) u_max = std::max(u_max, v.cwiseAbs().maxCoeff());
  r.payload = Json{{"c_mr", res.c_mr ? Json(*res.c_mr) : Json(nullptr)},
                   {"norms",
                    {{"udot", res.norms.udot}, {"Au", res.norms.Au}, {"f", res.norms.f}, {"u0", res.norms.u0_interp}}},
                   {"q_norm", res.q_norm ? Json(*res.q_norm) : Json(nullptr)},
                   {"neumann_iters", res.neumann_iters},
                   {"u_max", u_max}};
  const bool data_zero = res.norms.f == 0.0 && res.norms.u0_interp == 0.0;
  r.status = (res.c_mr && std::isfinite(*res.c_mr)) || data_zero ? Status::pass : Status::fail;
  return r;
}

CheckResult check_oracle(Context& ctx, const Json& p) {
  CheckResult r;
  const std::string u0 = str(p, "u0", "sin"), f = str(p, "f", "one"), ft = str(p, "f_time", "cos");
  const int refine = static_cast<int>(integer(p, "refine", 8));
  const int doublings = static_cast<int>(integer(p, "doublings", 0));
  const double tol = num(p, "tol", 1e-2);
  if (refine < 1 || doublings < 0) throw ConfigError("oracle: refine >= 1 and doublings >= 0 required");
  r.provenance = Json{{"u0", u0}, {"f", f}, {"f_time", ft}, {"refine", refine}, {"doublings", doublings}, {"tol", tol}};
  Json rows = Json::array();
  std::vector<double> errors;
  for (int k = 0; k <= doublings; ++k) {
    const int steps = ctx.scenario().time.steps << k;
    const OperatorFamily fam = k == 0 ? ctx.family() : ctx.family(steps);
    NacpProblem pr{fam, sample(ctx.mesh(), fam.bc, spatial_profile(u0, ctx.mesh().kind)),
                   forcing(fam, ctx.mesh(), f, ft), ctx.scenario().p, ctx.scenario().q};
    const double err = relative_sup_error(solve_at(pr).u, cn_oracle(pr, refine));
    errors.push_back(err);
    rows.push_back(Json{{"steps", steps}, {"relative_sup_error", err}});
  }
  bool decreasing = true;
  for (std::size_t k = 1; k < errors.size(); ++k) decreasing = decreasing && errors[k] < errors[k - 1];
  r.payload = Json{{"errors", rows}, {"strictly_decreasing", decreasing}};
  r.status = errors.front() <= tol && decreasing ? Status::pass : Status::fail;
  return r;
}

std::vector<std::pair<double, double>> pairs_from(const Json& p, double T) {
  const double t0 = num(p, "t0", 0.0);
  const double lo = num(p, "min_sep", 1e-4 * T), hi = num(p, "max_sep", 1e-2 * T);
  const int count = static_cast<int>(integer(p, "pairs", 10));
  if (t0 + hi > T) throw ConfigError("time pairs leave [0, T]");
  return anchored_pairs(t0, lo, hi, count);
}

Json pairs_json(const std::vector<std::pair<double, double>>& pairs) {
  Json out = Json::array();
  for (const auto& [t, s] : pairs) out.push_back(Json::array({t, s}));
  return out;
}

CheckResult check_at_fit(Context& ctx, const Json& p) {
  CheckResult r;
  const OperatorFamily& fam = ctx.family();
  AtFitOptions o;
  o.pairs = pairs_from(p, fam.horizon());
  o.decades = static_cast<int>(integer(p, "decades", o.decades));
  o.per_decade = static_cast<int>(integer(p, "per_decade", o.per_decade));
  const ATFit fit = at_fit(fam, o);
  r.provenance = Json{{"pairs", pairs_json(o.pairs)}, {"ray_angles", o.ray_angles}, {"radii", fit.radii}};
  if (fit.autonomous) {
    r.payload = Json{{"autonomous", true}};
    r.message = "autonomous";
    r.status = Status::pass;
    return r;
  }
  r.payload = Json{{"autonomous", false},   {"K_fit", fit.K_fit},         {"beta_fit", fit.beta_fit},
                   {"gamma_fit", fit.gamma_fit}, {"r2_time", fit.r2_time}, {"r2_lambda", fit.r2_lambda},
                   {"admissible", fit.admissible}};
  r.status = fit.admissible ? Status::pass : Status::fail;
  if (!fit.admissible) r.message = "fitted beta does not exceed fitted gamma";
  return r;
}

CheckResult check_holder_defect(Context& ctx, const Json& p) {
  CheckResult r;
  const OperatorFamily& fam = ctx.family();
  const double gamma = num(p, "gamma", 0.0);
  const auto pairs = pairs_from(p, fam.horizon());
  Json rows = Json::array();
  std::vector<double> x, y;
  for (const auto& [t, s] : pairs) {
    const NormBounds b = holder_defect(fam, t, s, gamma);
    rows.push_back(Json{{"t", t}, {"s", s}, {"defect", bounds_json(b)}});
    if (b.upper > 0.0) {
      x.push_back(std::log(std::abs(s - t)));
      y.push_back(std::log(b.upper));
    }
  }
  r.provenance = Json{{"gamma", gamma}, {"pairs", pairs_json(pairs)}};
  r.payload = Json{{"samples", rows}};
  if (x.size() < 2) {
    r.payload["constant_in_time"] = true;
    r.status = Status::pass;
    return r;
  }
  const LinearFit lf = least_squares_line(x, y);
  r.payload["exponent"] = lf.slope;
  r.payload["constant"] = std::exp(lf.intercept);
  r.payload["r2"] = lf.r2;
  r.status = lf.slope > 0.0 && std::isfinite(lf.intercept) ? Status::pass : Status::fail;
  return r;
}

CheckResult check_shift_search(Context& ctx, const Json& p) {
  CheckResult r;
  const auto grid = list(p, "grid", kDefaultMuGrid);
  const double target = num(p, "target", kAutoShiftTarget);
  QNormOptions qo;
  qo.seed = ctx.seed();
  r.provenance = Json{{"grid", grid}, {"target", target}, {"q_norm_restarts", qo.restarts}};
  const OperatorFamily base = ctx.unshifted_family(ctx.scenario().time.steps);
  try {
    const ShiftSearchResult res = shift_search(base, grid, target, ctx.scenario().q, ctx.scenario().p, qo);
    Json table = Json::array();
    for (const auto& [m, qn] : res.table) table.push_back(Json{{"mu", m}, {"q_norm", qn}});
    r.payload = Json{{"mu_star", res.mu_star}, {"nonincreasing", res.nonincreasing}, {"table", table}};
    r.status = res.nonincreasing ? Status::pass : Status::fail;
    if (!res.nonincreasing) r.message = "||Q|| increases along the shift grid";
  } catch (const ExhaustedError& e) {
    Json table = Json::array();
    for (const auto& [m, qn] : e.table()) table.push_back(Json{{"mu", m}, {"q_norm", qn}});
    r.payload = Json{{"table", table}};
    r.status = Status::fail;
    r.message = e.what();
  }
  return r;
}

CheckResult check_r_bound(Context& ctx, const Json& p) {
  CheckResult r;
  const OperatorFamily& fam = ctx.family();
  const double phi = num(p, "phi", kPi / 2.0);
  const int k_max = static_cast<int>(integer(p, "k_max", 4));
  const double factor = num(p, "factor", 2.0);
  RBoundOptions o;
  o.grid.per_decade = static_cast<int>(integer(p, "per_decade", 2));
  o.budget = integer(p, "budget", 2000);
  o.restarts = static_cast<int>(integer(p, "restarts", o.restarts));
  o.seed = ctx.seed();
  const SectorReport sec = sector_verify(fam, phi, o.grid);
  const RBoundReport rep = r_bound_estimate(fam, phi, k_max, o);
  const double bound = sec.constant_one_plus.upper;
  Json witness = Json::array();
  for (std::size_t j = 0; j < rep.witness.lambdas.size(); ++j)
    witness.push_back(Json{{"lambda", complex_json(rep.witness.lambdas[j])}, {"time_index", rep.witness.time_indices[j]}});
  r.provenance = Json{{"phi", phi}, {"k_max", k_max}, {"budget", o.budget}, {"restarts", o.restarts},
                      {"per_decade", o.grid.per_decade}, {"seed", rep.seed}};
  r.payload = Json{{"estimate", rep.estimate}, {"sector_constant", bound}, {"ratio", rep.estimate / bound},
                   {"witness", witness}};
  const bool hilbert = fam.p == 2.0;
  r.payload["hilbert_comparison"] = hilbert;
  const bool ok = std::isfinite(rep.estimate) && (!hilbert || rep.estimate <= factor * bound);
  r.status = ok ? Status::pass : Status::fail;
  return r;
}

CheckResult check_gaussian(Context& ctx, const Json& p) {
  CheckResult r;
  const OperatorFamily& fam = ctx.family();
  GaussianParams gp;
  gp.C = num(p, "C", gp.C);
  gp.beta = num(p, "beta", gp.beta);
  gp.omega1 = num(p, "omega1", gp.omega1);
  gp.tolerance = num(p, "tolerance", gp.tolerance);
  gp.envelope = str(p, "envelope", "lattice") == "analytic" ? Envelope::analytic : Envelope::lattice;
  const auto s_list = list(p, "s_list", {0.01, 0.1, 1.0});
  const int ti = static_cast<int>(integer(p, "time_index", 0));
  const auto reps = gaussian_domination(fam, ctx.mesh(), s_list, gp, ti);
  Json rows = Json::array();
  bool all = true;
  for (const auto& g : reps) {
    rows.push_back(Json{{"s", g.s},
                        {"max_ratio", g.max_ratio},
                        {"pass", g.pass},
                        {"witness", Json::array({g.witness_i, g.witness_j})},
                        {"continuum_ratio", g.continuum_ratio},
                        {"unresolved", g.unresolved}});
    all = all && g.pass;
  }
  r.provenance = Json{{"C", gp.C}, {"beta", gp.beta}, {"omega1", gp.omega1}, {"tolerance", gp.tolerance},
                      {"envelope", str(p, "envelope", "lattice")}, {"time_index", ti}};
  r.payload = Json{{"samples", rows}};
  r.status = all ? Status::pass : Status::fail;
  return r;
}

CheckResult check_bip(Context& ctx, const Json& p) {
  CheckResult r;
  const OperatorFamily& fam = ctx.family();
  const double s_max = num(p, "s_max", 5.0);
  const int samples = static_cast<int>(integer(p, "samples", 21));
  const double m_max = num(p, "M_max", 10.0);
  const double tol = num(p, "unitarity_tol", 1e-8);
  const int ti = static_cast<int>(integer(p, "time_index", 0));
  if (samples < 3 || ti < 0 || ti >= fam.nodes()) throw ConfigError("bip: bad samples or time_index");
  std::vector<double> s;
  for (int k = 0; k < samples; ++k) s.push_back(-s_max + 2.0 * s_max * k / (samples - 1));
  const MatrixXd& A = fam.matrices[static_cast<std::size_t>(ti)];
  const BipFit fit = bip_fit(A, {fam.weights, fam.p}, s);
  const MatrixXd K = fam.weights.asDiagonal() * A;
  const bool self_adjoint = fam.p == 2.0 && (K - K.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * K.cwiseAbs().maxCoeff();
  r.provenance = Json{{"s_values", s}, {"time_index", ti}};
  r.payload = Json{{"M", fit.M}, {"omega", fit.omega}, {"max_unitarity_defect", fit.max_unitarity_defect},
                   {"self_adjoint", self_adjoint}, {"norms", fit.norms}};
  const bool ok = self_adjoint ? fit.max_unitarity_defect <= tol : std::isfinite(fit.M) && fit.M <= m_max;
  r.status = ok ? Status::pass : Status::fail;
  return r;
}

CheckResult check_vmo(Context& ctx, const Json& p) {
  CheckResult r;
  const auto radii = list(p, "radii", {0.03125, 0.0625, 0.125, 0.25});
  const double t = num(p, "t", 0.0);
  VmoOptions vo;
  vo.sample_density = static_cast<int>(integer(p, "sample_density", vo.sample_density));
  const VmoProfile prof = vmo_modulus(ctx.field(), t, radii, vo);
  r.provenance = Json{{"t", t}, {"sample_density", vo.sample_density}};
  r.payload = Json{{"field", prof.field_id}, {"radii", prof.radii}, {"eta", prof.eta},
                   {"domination_certified", false}};
  bool ok = std::all_of(prof.eta.begin(), prof.eta.end(), [](double v) { return std::isfinite(v); });
  if (p.contains("max_eta") && !prof.eta.empty()) ok = ok && prof.eta.front() <= num(p, "max_eta", 0.0);
  r.status = ok ? Status::pass : Status::fail;
  return r;
}

CheckResult check_uniqueness(Context& ctx, const Json& p) {
  CheckResult r;
  const OperatorFamily& fam = ctx.family();
  const double tol = num(p, "tol", 1e-12);
  NacpProblem pr{fam, VectorXd::Zero(fam.size()), zero_trajectory(fam), ctx.scenario().p, ctx.scenario().q};
  const MRSolveResult res = solve_at(pr);
  double u_max = 0.0, scale = 0.0;
  for (const VectorXd& v : res.u) u_max = std::max(u_max, v.cwiseAbs().maxCoeff());
  for (const MatrixXd& A : fam.matrices) scale = std::max(scale, A.cwiseAbs().maxCoeff());
  r.provenance = Json{{"tol", tol}};
  r.payload = Json{{"u_max", u_max}, {"matrix_scale", scale}};
  r.status = u_max <= tol * std::max(scale, 1.0) ? Status::pass : Status::fail;
  return r;
}

CheckResult check_khintchine(Context& ctx, const Json& p) {
  CheckResult r;
  const int k_max = static_cast<int>(integer(p, "k_max", 10));
  const int draws = static_cast<int>(integer(p, "draws", 5));
  const int size = static_cast<int>(integer(p, "size", 8));
  if (k_max < 2 || k_max > 12 || draws < 1 || size < 1) throw ConfigError("khintchine: need 2 <= k_max <= 12");
  const WeightedSpace space = WeightedSpace::uniform(size, ctx.scenario().p);
  Rng rng(ctx.seed());
  Json rows = Json::array();
  bool finite = true;
  for (int k = 1; k <= k_max; ++k)
    for (int d = 0; d < draws; ++d) {
      std::vector<VectorXd> vecs;
      for (int j = 0; j < k; ++j) {
        VectorXd v(size);
        for (int i = 0; i < size; ++i) v(i) = rng.normal();
        vecs.push_back(v);
      }
      const KhintchineConstants c = khintchine_check(vecs, space);
      finite = finite && std::isfinite(c.lower) && std::isfinite(c.upper) && c.lower > 0.0;
      rows.push_back(Json{{"k", k}, {"draw", d}, {"lower", c.lower}, {"upper", c.upper}});
    }
  // Two equal scalar terms: E|e1 + e2| / sqrt(2) = 1/sqrt(2).
  const KhintchineConstants scalar =
      khintchine_check({VectorXd::Ones(1), VectorXd::Ones(1)}, WeightedSpace::uniform(1, ctx.scenario().p));
  const bool scalar_ok = std::abs(scalar.lower - 1.0 / std::sqrt(2.0)) <= 1e-12;
  r.provenance = Json{{"k_max", k_max}, {"draws", draws}, {"size", size}};
  r.payload = Json{{"samples", rows}, {"scalar_pair", scalar.lower}};
  r.status = finite && scalar_ok ? Status::pass : Status::fail;
  return r;
}

SweepOptions sweep_base(Context& ctx) {
  SweepOptions o;
  o.seed = ctx.seed();
  o.workers = ctx.workers();
  o.timings = ctx.timings();
  o.T = ctx.scenario().time.T;
  o.steps = ctx.scenario().time.steps;
  o.grading = ctx.scenario().time.grading;
  o.mu = ctx.scenario().shift;
  return o;
}

CheckResult check_robin_sweep(Context& ctx, const Json& p) {
  CheckResult r;
  RobinSweepOptions o;
  static_cast<SweepOptions&>(o) = sweep_base(ctx);
  o.domain = ctx.scenario().domain.kind;
  if (ctx.scenario().field.family == "robin") {
    const Json& fp = ctx.scenario().field.params;
    o.beta0 = number_at(fp, "beta0", o.beta0, "field.params");
    o.amplitude = number_at(fp, "amplitude", o.amplitude, "field.params");
    o.lipschitz_slope = number_at(fp, "lipschitz_slope", o.lipschitz_slope, "field.params");
  }
  o.beta0 = num(p, "beta0", o.beta0);
  o.amplitude = num(p, "amplitude", o.amplitude);
  o.lipschitz_slope = num(p, "lipschitz_slope", o.lipschitz_slope);
  o.instability_threshold = num(p, "threshold", o.instability_threshold);
  const auto alphas = list(p, "alpha_list", {0.9});
  const auto refinements = list(p, "refinements", default_refinements(ctx.scenario()));
  Table t = robin_sweep(alphas, ctx.scenario().p, ctx.scenario().q, refinements, o);
  bool unstable_met = false;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const Cell& hyp = t.rows[k][static_cast<std::size_t>(
        std::find(t.columns.begin(), t.columns.end(), "hypothesis") - t.columns.begin())];
    const Cell& uns = t.rows[k][static_cast<std::size_t>(
        std::find(t.columns.begin(), t.columns.end(), "unstable") - t.columns.begin())];
    if (std::get<std::string>(hyp) == "met" && std::get<bool>(uns)) unstable_met = true;
  }
  r.provenance = Json{{"alpha_list", alphas}, {"refinements", refinements}, {"threshold", o.instability_threshold},
                      {"beta0", o.beta0}, {"amplitude", o.amplitude}, {"lipschitz_slope", o.lipschitz_slope}};
  r.payload = Json{{"threshold_alpha", 0.5 - 0.5 / ctx.scenario().p}, {"unstable_within_hypothesis", unstable_met}};
  r.table = std::move(t);
  r.status = unstable_met ? Status::fail : Status::pass;
  if (unstable_met) r.message = "c_mr varies beyond the threshold for an admissible alpha";
  return r;
}

CheckResult check_divergence_suite(Context& ctx, const Json& p) {
  CheckResult r;
  SuiteOptions o;
  static_cast<SweepOptions&>(o) = sweep_base(ctx);
  o.domain = ctx.scenario().domain.kind;
  o.vmo_radii = list(p, "vmo_radii", o.vmo_radii);
  o.at_max_size = static_cast<int>(integer(p, "at_max_size", o.at_max_size));
  o.dense_max_size = static_cast<int>(integer(p, "dense_max_size", o.dense_max_size));
  o.draws = static_cast<int>(integer(p, "draws", o.draws));
  const Json& fp = ctx.scenario().field.params;
  const double beta_time = num(p, "beta_time", fp.contains("beta_time") ? fp.at("beta_time").get<double>() : 0.75);
  const auto refinements = list(p, "refinements", default_refinements(ctx.scenario()));
  const std::string expect = str(p, "expect", "none");
  Table t = divergence_form_suite(ctx.scenario().field, beta_time, ctx.scenario().p, ctx.scenario().q, refinements, o);

  std::vector<double> grad, cmr;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    if (auto v = t.number(k, "grad_ratio")) grad.push_back(*v);
    if (auto v = t.number(k, "c_mr")) cmr.push_back(*v);
  }
  const bool finite = std::all_of(grad.begin(), grad.end(), [](double v) { return std::isfinite(v); }) &&
                      std::all_of(cmr.begin(), cmr.end(), [](double v) { return std::isfinite(v); });
  r.provenance = Json{{"beta_time", beta_time}, {"refinements", refinements}, {"vmo_radii", o.vmo_radii},
                      {"draws", o.draws}};
  r.payload = Json{{"scope", ctx.scenario().p >= 2.0 ? "in-theorem" : "out-of-theorem"},
                   {"grad_ratio_variation", relative_variation(grad)},
                   {"c_mr_variation", relative_variation(cmr)},
                   {"expect", expect}};
  bool ok = finite && !grad.empty();
  // Rows are sorted by decreasing h, so the last entry is the finest mesh.
  if (expect == "stable") ok = ok && relative_variation(grad) <= 0.25 && relative_variation(cmr) <= 0.25;
  if (expect == "growth") ok = ok && grad.size() >= 2 && grad.back() > grad.front();
  r.table = std::move(t);
  r.status = ok ? Status::pass : Status::fail;
  return r;
}

CheckResult check_meyers(Context& ctx, const Json& p) {
  CheckResult r;
  MeyersOptions o;
  static_cast<SweepOptions&>(o) = sweep_base(ctx);
  if (!o.mu) o.mu = 0.0;
  o.cutoff = num(p, "cutoff", o.cutoff);
  const auto refinements = list(p, "refinements", {1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0});
  const auto p_list = list(p, "p_list", {2.0, 4.0});
  Table t = meyers_regression(refinements, p_list, o);

  // Ratios per exponent in order of decreasing h.
  std::map<double, std::vector<double>> by_p;
  for (std::size_t k = 0; k < t.rows.size(); ++k) by_p[*t.number(k, "p")].push_back(*t.number(k, "ratio"));
  Json summary = Json::array();
  bool ok = true;
  for (const auto& [pp, ratios] : by_p) {
    bool increasing = true;
    for (std::size_t k = 1; k < ratios.size(); ++k) increasing = increasing && ratios[k] > ratios[k - 1];
    const double growth = ratios.back() / ratios.front();
    summary.push_back(Json{{"p", pp}, {"increasing", increasing}, {"growth", growth},
                           {"variation", relative_variation(ratios)}});
    if (pp >= 4.0) {
      ok = ok && increasing;
      if (p.contains("min_growth")) ok = ok && growth >= num(p, "min_growth", 1.0);
    } else if (p.contains("max_variation")) {
      ok = ok && relative_variation(ratios) <= num(p, "max_variation", 0.1);
    }
  }
  r.provenance = Json{{"refinements", refinements}, {"p_list", p_list}, {"cutoff", o.cutoff},
                      {"core_radius", 0.5 * o.cutoff}};
  r.payload = Json{{"per_exponent", summary}};
  r.table = std::move(t);
  r.status = ok ? Status::pass : Status::fail;
  return r;
}

}  // namespace

const std::map<std::string, CheckDef>& check_registry() {
  using K = ParamKind;
  static const std::map<std::string, CheckDef> reg{
      {"sector", {{{"phi", K::number}, {"per_decade", K::integer}, {"offset", K::number}}, check_sector}},
      {"solve_at",
       {{{"u0", K::string}, {"f", K::string}, {"f_time", K::string}, {"strategy", K::string}, {"estimate_q", K::boolean}},
        check_solve_at}},
      {"oracle",
       {{{"u0", K::string},
         {"f", K::string},
         {"f_time", K::string},
         {"refine", K::integer},
         {"doublings", K::integer},
         {"tol", K::number}},
        check_oracle}},
      {"at_fit",
       {{{"t0", K::number},
         {"min_sep", K::number},
         {"max_sep", K::number},
         {"pairs", K::integer},
         {"decades", K::integer},
         {"per_decade", K::integer}},
        check_at_fit}},
      {"holder_defect",
       {{{"gamma", K::number}, {"t0", K::number}, {"min_sep", K::number}, {"max_sep", K::number}, {"pairs", K::integer}},
        check_holder_defect}},
      {"shift_search", {{{"grid", K::number_list}, {"target", K::number}}, check_shift_search}},
      {"r_bound",
       {{{"phi", K::number},
         {"k_max", K::integer},
         {"budget", K::integer},
         {"restarts", K::integer},
         {"per_decade", K::integer},
         {"factor", K::number}},
        check_r_bound}},
      {"gaussian",
       {{{"C", K::number},
         {"beta", K::number},
         {"omega1", K::number},
         {"tolerance", K::number},
         {"envelope", K::string},
         {"s_list", K::number_list},
         {"time_index", K::integer}},
        check_gaussian}},
      {"bip",
       {{{"s_max", K::number},
         {"samples", K::integer},
         {"M_max", K::number},
         {"unitarity_tol", K::number},
         {"time_index", K::integer}},
        check_bip}},
      {"vmo", {{{"radii", K::number_list}, {"t", K::number}, {"sample_density", K::integer}, {"max_eta", K::number}},
               check_vmo}},
      {"uniqueness", {{{"tol", K::number}}, check_uniqueness}},
      {"khintchine", {{{"k_max", K::integer}, {"draws", K::integer}, {"size", K::integer}}, check_khintchine}},
      {"robin_sweep",
       {{{"alpha_list", K::number_list},
         {"refinements", K::number_list},
         {"threshold", K::number},
         {"beta0", K::number},
         {"amplitude", K::number},
         {"lipschitz_slope", K::number}},
        check_robin_sweep}},
      {"divergence_form_suite",
       {{{"beta_time", K::number},
         {"refinements", K::number_list},
         {"vmo_radii", K::number_list},
         {"expect", K::string},
         {"draws", K::integer},
         {"at_max_size", K::integer},
         {"dense_max_size", K::integer}},
        check_divergence_suite}},
      {"meyers",
       {{{"refinements", K::number_list},
         {"p_list", K::number_list},
         {"cutoff", K::number},
         {"min_growth", K::number},
         {"max_variation", K::number}},
        check_meyers}},
  };
  return reg;
}

bool check_registered(const std::string& name) { return check_registry().count(name) > 0; }

// --- running ---------------------------------------------------------------

Report run_scenario(const Scenario& scenario, const RunOptions& options) {
  for (const CheckSpec& c : scenario.checks) validate_params(c.name, c.params);
  const std::uint64_t seed = options.seed.value_or(scenario.seed);
  Context ctx(scenario, seed, std::max(1, options.workers), options.timings);

  Report rep;
  Json checks = Json::array();
  int counts[4] = {0, 0, 0, 0};
  std::map<std::string, int> csv_names;
  for (const CheckSpec& c : scenario.checks) {
    const auto t0 = Clock::now();
    CheckResult r;
    try {
      r = check_registry().at(c.name).run(ctx, c.params);
    } catch (const ConfigError&) {
      throw;
    } catch (const ExhaustedError& e) {
      r = CheckResult{};
      r.status = Status::error;
      r.message = e.what();
      Json table = Json::array();
      for (const auto& [m, qn] : e.table()) table.push_back(Json{{"mu", m}, {"q_norm", qn}});
      r.payload = Json{{"shift_table", table}};
    } catch (const Error& e) {
      r = CheckResult{};
      r.status = Status::error;
      r.message = e.what();
    }
    r.name = c.name;
    r.wall_ms = options.timings ? elapsed_ms(t0) : 0.0;
    ++counts[static_cast<int>(r.status)];

    Json prov = ctx.provenance();
    for (auto it = r.provenance.begin(); it != r.provenance.end(); ++it) prov[it.key()] = it.value();
    r.provenance = prov;

    Json entry{{"name", r.name},
               {"status", to_string(r.status)},
               {"message", r.message},
               {"payload", r.payload},
               {"provenance", r.provenance},
               {"wall_ms", r.wall_ms}};
    if (r.table) {
      const int k = csv_names[r.name]++;
      const std::string file = r.name + (k ? "_" + std::to_string(k + 1) : "") + ".csv";
      entry["csv"] = file;
      entry["table"] = r.table->to_json();
    }
    checks.push_back(std::move(entry));
    rep.results.push_back(std::move(r));
  }

  if (counts[static_cast<int>(Status::error)] > 0)
    rep.exit_code = 3;
  else if (counts[static_cast<int>(Status::fail)] + counts[static_cast<int>(Status::indeterminate)] > 0)
    rep.exit_code = 4;
  rep.document = Json{{"schema", kSchemaVersion},
                      {"scenario", scenario.source},
                      {"seed", seed},
                      {"checks", std::move(checks)},
                      {"summary",
                       {{"pass", counts[0]},
                        {"fail", counts[1]},
                        {"indeterminate", counts[2]},
                        {"error", counts[3]},
                        {"exit_code", rep.exit_code}}}};
  return rep;
}

void write_outputs(const Report& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ResourceError("cannot create output directory '" + dir + "': " + ec.message());
  {
    std::ofstream out(fs::path(dir) / "report.json", std::ios::binary);
    out << report.document.dump(2) << "\n";
    if (!out) throw ResourceError("cannot write report.json");
  }
  const Json& checks = report.document.at("checks");
  for (std::size_t k = 0; k < report.results.size(); ++k) {
    if (!report.results[k].table) continue;
    std::ofstream out(fs::path(dir) / checks[k].at("csv").get<std::string>(), std::ios::binary);
    out << report.results[k].table->to_csv();
    if (!out) throw ResourceError("cannot write CSV output");
  }
}

// --- sweeps ----------------------------------------------------------------

Table robin_sweep(const std::vector<double>& alpha_list, double p, double q, const std::vector<double>& refinements,
                  const RobinSweepOptions& options) {
  if (alpha_list.empty() || refinements.empty()) throw DomainError("robin_sweep: empty parameter lists");
  for (double a : alpha_list)
    if (!(a > 0.0 && a <= 1.0)) throw DomainError("robin_sweep: alpha must lie in (0, 1]");
  struct Point_ {
    double alpha, h;
  };
  std::vector<Point_> points;
  for (double a : alpha_list)
    for (double h : refinements) points.push_back({a, h});
  std::sort(points.begin(), points.end(), [](const Point_& x, const Point_& y) {
    return x.alpha != y.alpha ? x.alpha < y.alpha : x.h > y.h;
  });

  struct Row {
    double mu = 0.0;
    HolderFitResult holder;
    ATFit at;
    std::optional<double> c_mr;
    double wall_ms = 0.0;
  };
  const int dim = dimension_of(options.domain);
  const auto rows = parallel_map(points.size(), options.workers, [&](std::size_t k) {
    const auto t0 = Clock::now();
    const auto [alpha, h] = points[k];
    Row row;
    RobinParams rp;
    rp.alpha_time = alpha;
    rp.beta0 = options.beta0;
    rp.amplitude = options.amplitude;
    rp.lipschitz_slope = options.lipschitz_slope;
    rp.horizon = options.T;
    const CoefficientField field = robin_field(dim, options.domain, rp);
    const Mesh mesh = build_mesh(options.domain, h);
    const OperatorFamily base = build_family(mesh, field, BoundaryCondition::robin,
                                             time_grid(options.T, options.steps, options.grading), p);
    const OperatorFamily fam = with_shift(base, options.mu, q, p, options.seed, &row.mu);

    // A uniform grid repeats every separation, so the per-separation maximum
    // picks up the pair anchored at the rough point t = 0.
    std::vector<double> samples;
    for (int j = 0; j <= 32; ++j) samples.push_back(options.T * j / 32.0);
    row.holder = time_holder_fit(field, samples);

    AtFitOptions ao;
    ao.pairs = anchored_pairs(0.0, 1e-4 * options.T, 1e-2 * options.T, 10);
    row.at = at_fit(fam, ao);

    const VectorXd u0 = sample(mesh, BoundaryCondition::robin, [](const Point& x) { return 0.25 * std::cos(kPi * x[0]); });
    NacpProblem pr{fam, u0, {}, p, q};
    pr.f = sample_in_time(fam, [&](double t) {
      return sample(mesh, BoundaryCondition::robin, [t](const Point& x) { return 1.0 + x[0] * std::cos(kPi * t); });
    });
    MRSolveResult res = solve_at(pr);
    row.c_mr = res.c_mr;
    row.wall_ms = options.timings ? elapsed_ms(t0) : 0.0;
    return row;
  });

  // Instability is judged per alpha across the refinements.
  std::map<double, std::vector<double>> by_alpha;
  for (std::size_t k = 0; k < points.size(); ++k)
    if (rows[k].c_mr) by_alpha[points[k].alpha].push_back(*rows[k].c_mr);

  const double threshold_alpha = 0.5 - 0.5 / p;
  Table t;
  t.columns = {"alpha", "h",         "seed",      "mu",        "holder_exponent", "holder_r2", "at_status",
               "beta_fit", "gamma_fit", "hypothesis", "c_mr", "c_mr_variation", "unstable", "wall_ms"};
  for (std::size_t k = 0; k < points.size(); ++k) {
    const Row& row = rows[k];
    const double variation = relative_variation(by_alpha[points[k].alpha]);
    const bool autonomous = row.at.autonomous;
    t.add({points[k].alpha,
           points[k].h,
           static_cast<long long>(options.seed),
           row.mu,
           row.holder.constant_in_time ? Cell{} : Cell{row.holder.exponent},
           row.holder.constant_in_time ? Cell{} : Cell{row.holder.r2},
           std::string(autonomous ? "autonomous" : (row.at.admissible ? "admissible" : "not-admissible")),
           autonomous ? Cell{} : Cell{row.at.beta_fit},
           autonomous ? Cell{} : Cell{row.at.gamma_fit},
           std::string(points[k].alpha > threshold_alpha ? "met" : "hypothesis-not-met"),
           opt_cell(row.c_mr),
           variation,
           variation > options.instability_threshold,
           row.wall_ms});
  }
  return t;
}

namespace {

struct MeyersSample {
  double grad = 0.0;
  double data = 0.0;
};

// Discrete solution with the cut-off Meyers profile as right-hand side data.
std::vector<MeyersSample> meyers_point(double h, const std::vector<double>& p_list, double cutoff, double mu) {
  const Mesh mesh = build_mesh(DomainKind::disk, h);
  const BoundaryCondition bc = BoundaryCondition::dirichlet;
  Eigen::SparseMatrix<double> A = assemble_operator(mesh, meyers_field(), bc, 0.0);
  if (mu != 0.0) {
    Eigen::SparseMatrix<double> I(A.rows(), A.cols());
    I.setIdentity();
    A += mu * I;
  }
  const VectorXd w = restrict_to_dofs(mesh, bc, meyers_witness(mesh, cutoff));
  VectorXd F = A * w;
  const auto& dofs = dof_nodes(mesh, bc);
  for (std::size_t k = 0; k < dofs.size(); ++k)
    if (mesh.nodes[static_cast<std::size_t>(dofs[k])].norm() < 0.5 * cutoff) F(static_cast<Eigen::Index>(k)) = 0.0;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw SingularityError("meyers: operator factorization failed");
  const VectorXd wh = lu.solve(F);
  const VectorXd weights = dof_weights(mesh, bc);
  const VectorXd nodal = extend_to_nodes(mesh, bc, wh);
  std::vector<MeyersSample> out;
  for (double p : p_list) out.push_back({gradient_norm(mesh, nodal, p), lp_norm(weights, p, F) + lp_norm(weights, p, wh)});
  return out;
}

}  // namespace

Table meyers_regression(const std::vector<double>& refinements, const std::vector<double>& p_list,
                        const MeyersOptions& options) {
  if (refinements.empty() || p_list.empty()) throw DomainError("meyers_regression: empty parameter lists");
  for (double p : p_list)
    if (!(p >= 1.0)) throw DomainError("meyers_regression: exponents must be >= 1");
  std::vector<double> hs = refinements;
  std::sort(hs.begin(), hs.end(), std::greater<>());
  std::vector<double> ps = p_list;
  std::sort(ps.begin(), ps.end());
  const double mu = options.mu.value_or(0.0);

  struct Row {
    std::vector<MeyersSample> samples;
    double wall_ms = 0.0;
  };
  const auto rows = parallel_map(hs.size(), options.workers, [&](std::size_t k) {
    const auto t0 = Clock::now();
    Row row{meyers_point(hs[k], ps, options.cutoff, mu), 0.0};
    row.wall_ms = options.timings ? elapsed_ms(t0) : 0.0;
    return row;
  });

  Table t;
  t.columns = {"p", "h", "seed", "mu", "grad_norm", "data_norm", "ratio", "wall_ms"};
  for (std::size_t j = 0; j < ps.size(); ++j)
    for (std::size_t k = 0; k < hs.size(); ++k) {
      const MeyersSample& s = rows[k].samples[j];
      t.add({ps[j], hs[k], static_cast<long long>(options.seed), mu, s.grad, s.data, s.grad / s.data, rows[k].wall_ms});
    }
  return t;
}

Table divergence_form_suite(const FieldSpec& field, double beta_time, double p, double q,
                            const std::vector<double>& refinements, const SuiteOptions& options) {
  if (refinements.empty()) throw DomainError("divergence_form_suite: empty refinement list");
  FieldSpec spec = field;
  if (spec.family == "holder_blend" || spec.family == "checkerboard" || spec.family == "drift")
    spec.params["beta_time"] = beta_time;
  const bool meyers = spec.family == "meyers";
  const DomainKind domain = meyers ? DomainKind::disk : options.domain;
  const int dim = dimension_of(domain);
  const CoefficientField coeff = make_field(spec, dim, domain, options.T);
  const BoundaryCondition bc = BoundaryCondition::dirichlet;

  std::vector<double> hs = refinements;
  std::sort(hs.begin(), hs.end(), std::greater<>());

  struct Row {
    double mu = 0.0;
    std::vector<double> eta;
    std::optional<double> beta_fit, gamma_fit;
    std::optional<bool> admissible;
    double grad_ratio = 0.0;
    std::optional<double> kato_ratio, q_norm, c_mr;
    double wall_ms = 0.0;
  };
  const Rng root(options.seed);
  const auto rows = parallel_map(hs.size(), options.workers, [&](std::size_t k) {
    const auto t0 = Clock::now();
    const double h = hs[k];
    Row row;
    const Mesh mesh = build_mesh(domain, h);
    const auto n = static_cast<int>(dof_nodes(mesh, bc).size());
    const VectorXd weights = dof_weights(mesh, bc);

    VmoOptions vo;
    vo.sample_density = std::max(64, static_cast<int>(std::lround(4.0 / h)));
    row.eta = vmo_modulus(coeff, 0.0, options.vmo_radii, vo).eta;

    std::vector<VectorXd> draws;
    for (int d = 0; d < options.draws; ++d)
      draws.push_back(sample(mesh, bc, random_smooth(domain, root.split(static_cast<std::uint64_t>(d)))));

    std::optional<OperatorFamily> fam;
    if (n <= options.dense_max_size) {
      const OperatorFamily base =
          build_family(mesh, coeff, bc, time_grid(options.T, options.steps, options.grading), p);
      fam = with_shift(base, options.mu, q, p, options.seed, &row.mu);
    } else {
      row.mu = options.mu.value_or(0.0);
    }

    Eigen::SparseMatrix<double> A = assemble_operator(mesh, coeff, bc, 0.0);
    if (row.mu != 0.0) {
      Eigen::SparseMatrix<double> I(A.rows(), A.cols());
      I.setIdentity();
      A += row.mu * I;
    }
    if (meyers) {
      row.grad_ratio = [&] {
        const MeyersSample s = meyers_point(h, {p}, 0.9, row.mu).front();
        return s.grad / s.data;
      }();
    } else {
      for (const VectorXd& u : draws) {
        const double g = gradient_norm(mesh, extend_to_nodes(mesh, bc, u), p);
        const VectorXd Au = A * u;
        row.grad_ratio = std::max(row.grad_ratio, g / (lp_norm(weights, p, Au) + lp_norm(weights, p, u)));
      }
    }

    if (fam) {
      if (p <= 2.0 && n <= options.kato_max_size) {
        const MatrixXd root_A = real_power(fam->matrices.front(), 0.5);
        double kato = 0.0;
        for (const VectorXd& u : draws)
          kato = std::max(kato, gradient_norm(mesh, extend_to_nodes(mesh, bc, u), p) /
                                    lp_norm(weights, p, VectorXd(root_A * u)));
        row.kato_ratio = kato;
      }
      if (n <= options.at_max_size) {
        AtFitOptions ao;
        ao.pairs = anchored_pairs(0.0, 1e-4 * options.T, 1e-2 * options.T, std::max(8, options.at_pairs));
        const ATFit fit = at_fit(*fam, ao);
        row.admissible = fit.autonomous || fit.admissible;
        if (!fit.autonomous) {
          row.beta_fit = fit.beta_fit;
          row.gamma_fit = fit.gamma_fit;
        }
      }
      QNormOptions qo;
      qo.seed = options.seed;
      row.q_norm = fam->autonomous() ? 0.0 : q_norm_estimate(QOperator(*fam), *fam, q, p, qo);
      NacpProblem pr{*fam, sample(mesh, bc, spatial_profile("sin", domain)), {}, p, q};
      pr.f = sample_in_time(*fam, [&](double) { return VectorXd(VectorXd::Ones(fam->size())); });
      MRSolveResult res = solve_at(pr);
      row.c_mr = res.c_mr;
    }
    row.wall_ms = options.timings ? elapsed_ms(t0) : 0.0;
    return row;
  });

  Table t;
  t.columns = {"h", "seed", "mu", "alpha0"};
  for (double r : options.vmo_radii) t.columns.push_back("vmo_eta_at_" + format_double(r));
  for (const char* c : {"beta_fit", "gamma_fit", "admissible", "grad_ratio", "kato_ratio", "q_norm", "c_mr", "wall_ms"})
    t.columns.push_back(c);
  for (std::size_t k = 0; k < hs.size(); ++k) {
    const Row& row = rows[k];
    std::vector<Cell> cells{hs[k], static_cast<long long>(options.seed), row.mu, coeff.alpha0};
    for (double e : row.eta) cells.emplace_back(e);
    cells.push_back(opt_cell(row.beta_fit));
    cells.push_back(opt_cell(row.gamma_fit));
    cells.push_back(row.admissible ? Cell{*row.admissible} : Cell{});
    cells.emplace_back(row.grad_ratio);
    cells.push_back(opt_cell(row.kato_ratio));
    cells.push_back(opt_cell(row.q_norm));
    cells.push_back(opt_cell(row.c_mr));
    cells.emplace_back(row.wall_ms);
    t.add(std::move(cells));
  }
  return t;
}

}  // namespace mrlab::lab
