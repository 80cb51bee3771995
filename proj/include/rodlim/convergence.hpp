#pragma once

#include "rodlim/beam3d.hpp"
#include "rodlim/rod_model.hpp"

#include <functional>
#include <string>
#include <vector>

namespace rodlim {

struct LadderSpec {
  std::vector<double> h_values;  ///< strictly decreasing
  std::vector<int> axial_elems;  ///< one per h
  double alpha = 3.0;
  double length = 1.0;
  RodLoads loads;
  std::shared_ptr<const CrossSection> section;
  StoredEnergy material{EnergyFamily::CompressibleNeoHookean, IsotropicModuli{}};
  int axial_order = 2;
  int rod_nodes = 129;
  /// Number of intervals of the common comparison grid on (0, L).
  int common_grid = 16;
  bool warm_start = true;
  int threads = 1;
  MinimizeOptions solver;
  std::string config_hash;

  void validate() const;
};

struct RungRecord {
  double h = 0.0;
  int axial_elems = 0;
  bool ok = false;
  std::string error;
  double err_u = 0.0, err_v2 = 0.0, err_v3 = 0.0, err_w = 0.0;  ///< discrete W1,2 errors
  double energy = 0.0;
  double elastic_energy = 0.0;
  double scaling_ratio = 0.0;
  double rotation_l2 = 0.0;
  double rotation_derivative_l2 = 0.0;
  double rotation_linf = 0.0;
  double mean_stress_l2 = 0.0;
  double stress_symmetry = 0.0;
  double distance_w12 = 0.0;  ///< ||y - x1 e1||_W1,2
  double stationarity = 0.0;
  double outer_variation_max = 0.0;
  int iterations = 0;
  std::string config_hash;
};

struct RateFit {
  std::string observable;
  bool valid = false;    ///< false when fewer than 3 positive values were available
  double slope = 0.0;    ///< least-squares slope of log e against log h
  double std_error = 0.0;
  int points = 0;
  bool decreasing = false;  ///< strictly decreasing along the ladder (h decreasing)
};

struct ConvergenceReport {
  double alpha = 0.0;
  std::string config_hash;
  double reference_el_residual = 0.0;
  std::vector<RungRecord> rungs;
  std::vector<RateFit> rates;
};

/// Called after every successful rung (for per-rung artifacts).
using RungCallback = std::function<void(const RungRecord&, const BeamProblem&, const MinimizeResult&, const Observables&)>;

/// Solves the limit problem once (it must satisfy el_residuals <= 1e-8), then
/// runs every rung; a failing rung is recorded and the ladder continues.
ConvergenceReport run_ladder(const LadderSpec& spec, const RungCallback& on_rung = {});

/// Discrete W1,2(0,L) norm on a uniform grid: trapezoidal L2 part plus
/// forward-difference derivative part.
double discrete_w12_norm(const std::vector<double>& values, double spacing);

/// Least-squares log-log fit. Throws InputError with fewer than 3 points.
RateFit fit_rate(const std::string& observable, const std::vector<double>& h, const std::vector<double>& e);

/// Rates for every tracked observable over the successful rungs.
/// Throws InputError ("insufficient data") with fewer than 3 successful rungs.
std::vector<RateFit> estimate_rates(const ConvergenceReport& report);

/// Observable names in report order, and accessor by name.
const std::vector<std::string>& tracked_observables();
double observable_value(const RungRecord& rung, const std::string& name);

struct EmitResult {
  std::vector<std::string> files;
  std::vector<std::string> warnings;
};

/// Writes ladder.csv, rates.json and one SVG log-log plot per observable with
/// positive data. Output bytes depend only on the report.
EmitResult emit_report(const ConvergenceReport& report, const std::string& out_dir);

/// Reads ladder.csv back (rates are recomputed by the caller).
ConvergenceReport read_ladder_csv(const std::string& path);

}  // namespace rodlim
