#pragma once

// Scenario-driven experiment runner: JSON scenarios, a registry of checks,
// the refinement sweeps and the report/CSV writers behind the `mrlab` CLI.

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mrlab/at_verifier.hpp"
#include "mrlab/discretizer.hpp"
#include "mrlab/field_models.hpp"
#include "mrlab/nacp_solver.hpp"
#include "mrlab/rbound.hpp"
#include "mrlab/sectorial.hpp"

namespace mrlab::lab {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "mrlab/1";

/// Invalid or unsupported scenario content (CLI exit status 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct DomainSpec {
  DomainKind kind = DomainKind::interval;
  double h = 1.0 / 16.0;
  std::vector<double> refinements;  // mesh widths for the sweeps
};

struct FieldSpec {
  std::string family = "identity";
  Json params = Json::object();
};

struct TimeSpec {
  double T = 1.0;
  int steps = 16;
  double grading = 1.0;
};

struct CheckSpec {
  std::string name;
  Json params = Json::object();
};

struct Scenario {
  std::string version = kSchemaVersion;
  DomainSpec domain;
  FieldSpec field;
  BoundaryCondition bc = BoundaryCondition::dirichlet;
  TimeSpec time;
  double p = 2.0;
  double q = 2.0;
  std::optional<double> shift;  // empty means "auto"
  std::vector<CheckSpec> checks;
  std::uint64_t seed = 1;
  std::string out_dir = "mrlab_out";
  Json source;  // the parsed document, echoed in the report
};

Scenario parse_scenario(const Json& doc);
Scenario load_scenario(const std::string& path);

/// Builds a coefficient field from a family name and its parameters.
CoefficientField make_field(const FieldSpec& spec, int dim, DomainKind domain, double horizon);

inline int dimension_of(DomainKind kind) { return kind == DomainKind::interval ? 1 : 2; }

// --- tables ---------------------------------------------------------------

using Cell = std::variant<std::monostate, double, long long, bool, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
  /// RFC-4180 CSV with '.' decimals (shortest round-trip form).
  std::string to_csv() const;
  Json to_json() const;
  std::optional<double> number(std::size_t row, const std::string& column) const;
};

std::string format_double(double v);

// --- checks ---------------------------------------------------------------

enum class Status { pass, fail, indeterminate, error };
std::string to_string(Status s);

struct CheckResult {
  std::string name;
  Status status = Status::indeterminate;
  Json payload = Json::object();
  Json provenance = Json::object();
  double wall_ms = 0.0;
  std::optional<Table> table;
  std::string message;
};

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  bool timings = true;
};

class Context;
using CheckFn = std::function<CheckResult(Context&, const Json& params)>;

enum class ParamKind { number, integer, boolean, string, number_list };

struct CheckDef {
  std::vector<std::pair<std::string, ParamKind>> params;  // accepted keys
  CheckFn run;
};

const std::map<std::string, CheckDef>& check_registry();
bool check_registered(const std::string& name);

/// Throws ConfigError when `params` has an unknown key or a value of the wrong type.
void validate_params(const std::string& check, const Json& params);

struct Report {
  Json document;
  std::vector<CheckResult> results;
  int exit_code = 0;
};

/// Runs every configured check in order; numerical errors are captured per check.
Report run_scenario(const Scenario& scenario, const RunOptions& options = {});

/// Writes report.json and one CSV per tabular check into `dir`.
void write_outputs(const Report& report, const std::string& dir);

// --- deterministic parallel map -------------------------------------------

/// Evaluates fn(0..count-1) on up to `workers` threads; results keep index order.
template <typename Fn>
auto parallel_map(std::size_t count, int workers, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<std::optional<R>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  const auto nthreads = static_cast<std::size_t>(std::max(1, workers));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        slots[k].emplace(fn(k));
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (nthreads == 1 || count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(nthreads, count); ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  std::vector<R> out;
  for (std::size_t k = 0; k < count; ++k) {
    if (errors[k]) std::rethrow_exception(errors[k]);
    out.push_back(std::move(*slots[k]));
  }
  return out;
}

// --- sweeps ---------------------------------------------------------------

struct SweepOptions {
  std::uint64_t seed = 1;
  int workers = 1;
  bool timings = true;
  double T = 1.0;
  int steps = 16;
  double grading = 1.0;
  std::optional<double> mu = 0.0;  // empty: shift_search with target 0.5 per point
};

struct RobinSweepOptions : SweepOptions {
  DomainKind domain = DomainKind::interval;
  double beta0 = 1.0;
  double amplitude = 1.0;
  double lipschitz_slope = 0.5;
  double instability_threshold = 0.25;
};

/// Per (alpha, h): Hölder fit of the Robin coefficient, AT fit, c_mr, and the
/// hypothesis label alpha > 1/2 - 1/(2p). Rows sorted by (alpha, h descending).
Table robin_sweep(const std::vector<double>& alpha_list, double p, double q, const std::vector<double>& refinements,
                  const RobinSweepOptions& options = {});

struct SuiteOptions : SweepOptions {
  DomainKind domain = DomainKind::square;
  std::vector<double> vmo_radii{0.0625, 0.125, 0.25};
  int at_pairs = 8;
  int draws = 3;               // random smooth functions per row
  int at_max_size = 400;       // larger rows leave the AT columns empty
  int dense_max_size = 1100;   // larger rows leave q_norm and c_mr empty
  int kato_max_size = 1200;
};

/// Per h: vmo profile, AT fit, gradient/Kato ratios on random smooth
/// functions (the singular profile for the Meyers family), ||Q||, c_mr.
Table divergence_form_suite(const FieldSpec& field, double beta_time, double p, double q,
                            const std::vector<double>& refinements, const SuiteOptions& options = {});

struct MeyersOptions : SweepOptions {
  double cutoff = 0.9;
};

/// Gradient-to-data ratio of the discrete solution with the Meyers singular
/// profile under refinement: ||grad w_h||_p / (||F_h||_p + ||w_h||_p), where
/// F_h is the operator applied to the cut-off profile with the core
/// |x| < cutoff/2 removed and A_h w_h = F_h.
Table meyers_regression(const std::vector<double>& refinements, const std::vector<double>& p_list,
                        const MeyersOptions& options = {});

}  // namespace mrlab::lab
