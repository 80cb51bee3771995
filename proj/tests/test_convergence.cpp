#include "rodlim/convergence.hpp"
#include "rodlim/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace rodlim;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rodlim_test_" + name);
  fs::remove_all(p);
  return p;
}

LadderSpec small_ladder(double f2) {
  LadderSpec s;
  s.h_values = {0.2, 0.1, 0.05};
  s.axial_elems = {2, 4, 8};
  s.alpha = 3.0;
  s.loads = {LoadFunction::constant(f2), LoadFunction::constant(0.0)};
  s.section = std::make_shared<const CrossSection>(normalize(sections::disc(2)));
  s.rod_nodes = 33;
  s.common_grid = 8;
  s.config_hash = "test";
  return s;
}

RungRecord synthetic_rung(double h, double e) {
  RungRecord r;
  r.h = h;
  r.axial_elems = static_cast<int>(std::lround(3.2 / h));
  r.ok = true;
  r.err_u = r.err_v2 = r.err_v3 = r.err_w = e;
  r.scaling_ratio = 1.0;
  r.rotation_l2 = r.rotation_derivative_l2 = r.mean_stress_l2 = r.distance_w12 = e;
  r.config_hash = "abc";
  return r;
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

}  // namespace

TEST(Convergence, FitRateExactPowerLaw) {
  const std::vector<double> h = {0.2, 0.1, 0.05, 0.025};
  std::vector<double> e;
  for (double x : h) e.push_back(x * x);
  const RateFit f = fit_rate("e", h, e);
  EXPECT_TRUE(f.valid);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_LT(f.std_error, 1e-12);
  EXPECT_TRUE(f.decreasing);
  EXPECT_EQ(f.points, 4);
}

TEST(Convergence, FitRateWithNoise) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<double> h, e;
  for (double x = 0.4; x > 0.01; x *= 0.7) {
    h.push_back(x);
    e.push_back(3.0 * std::pow(x, 1.5) * (1.0 + noise(rng)));
  }
  const RateFit f = fit_rate("e", h, e);
  EXPECT_NEAR(f.slope, 1.5, 0.1);
  EXPECT_LT(f.std_error, 0.1);
}

TEST(Convergence, FitRateFlagsStagnation) {
  const RateFit f = fit_rate("e", {0.2, 0.1, 0.05}, {1e-3, 1e-3, 1e-3});
  EXPECT_NEAR(f.slope, 0.0, 1e-12);
  EXPECT_FALSE(f.decreasing);
  EXPECT_THROW(fit_rate("e", {0.2, 0.1}, {1.0, 0.5}), InputError);
  const RateFit z = fit_rate("e", {0.2, 0.1, 0.05}, {1e-3, 0.0, 0.0});
  EXPECT_FALSE(z.valid);
}

TEST(Convergence, EstimateRatesNeedsThreeRungs) {
  ConvergenceReport r;
  r.rungs = {synthetic_rung(0.2, 0.04), synthetic_rung(0.1, 0.01)};
  EXPECT_THROW(estimate_rates(r), InputError);
  r.rungs.push_back(synthetic_rung(0.05, 0.0025));
  const auto rates = estimate_rates(r);
  ASSERT_EQ(rates.size(), tracked_observables().size());
  for (const RateFit& f : rates)
    if (f.observable != "scaling_ratio") {
      EXPECT_NEAR(f.slope, 2.0, 1e-12) << f.observable;
    }
  EXPECT_THROW(observable_value(r.rungs[0], "nope"), InputError);
}

TEST(Convergence, DiscreteNorm) {
  EXPECT_NEAR(discrete_w12_norm(std::vector<double>(5, 2.0), 0.25), 2.0, 1e-15);
  std::vector<double> lin;
  for (int i = 0; i <= 4; ++i) lin.push_back(0.25 * i);
  // Trapezoid L2^2 of x on [0,1] with 4 intervals = 11/32; derivative part = 1.
  EXPECT_NEAR(discrete_w12_norm(lin, 0.25), std::sqrt(11.0 / 32.0 + 1.0), 1e-14);
  EXPECT_EQ(discrete_w12_norm(std::vector<double>(3, 0.0), 0.5), 0.0);
}

TEST(Convergence, SpecValidation) {
  LadderSpec s = small_ladder(0.01);
  EXPECT_NO_THROW(s.validate());
  s.h_values = {0.1, 0.2, 0.05};
  EXPECT_THROW(s.validate(), InputError);
  s = small_ladder(0.01);
  s.axial_elems.pop_back();
  EXPECT_THROW(s.validate(), InputError);
  s = small_ladder(0.01);
  s.alpha = 1.5;
  EXPECT_THROW(s.validate(), InputError);
}

TEST(Convergence, ZeroLoadLadderHasZeroErrors) {
  const ConvergenceReport r = run_ladder(small_ladder(0.0));
  ASSERT_EQ(r.rungs.size(), 3u);
  for (const RungRecord& g : r.rungs) {
    EXPECT_TRUE(g.ok);
    EXPECT_EQ(g.err_u, 0.0);
    EXPECT_EQ(g.err_v2, 0.0);
    EXPECT_EQ(g.err_v3, 0.0);
    EXPECT_EQ(g.err_w, 0.0);
    EXPECT_EQ(g.config_hash, "test");
  }
}

TEST(Convergence, LoadedLadderConverges) {
  int calls = 0;
  const ConvergenceReport r =
      run_ladder(small_ladder(0.01), [&](const RungRecord& rec, const BeamProblem& p, const MinimizeResult&,
                                         const Observables& obs) {
        ++calls;
        EXPECT_EQ(p.config().h, rec.h);
        EXPECT_EQ(static_cast<int>(obs.x.size()), p.mesh().axial_nodes());
      });
  EXPECT_EQ(calls, 3);
  EXPECT_LT(r.reference_el_residual, 1e-8);
  for (std::size_t i = 1; i < r.rungs.size(); ++i) {
    EXPECT_LT(r.rungs[i].err_v2, r.rungs[i - 1].err_v2);
    EXPECT_LT(r.rungs[i].distance_w12, r.rungs[i - 1].distance_w12);
  }
}

TEST(Convergence, FailedRungIsRecordedAndLadderContinues) {
  LadderSpec s = small_ladder(0.01);
  s.warm_start = false;
  s.solver.max_iterations = 1;
  const ConvergenceReport r = run_ladder(s);
  ASSERT_EQ(r.rungs.size(), 3u);
  for (const RungRecord& g : r.rungs) {
    EXPECT_FALSE(g.ok);
    EXPECT_NE(g.error.find("no convergence"), std::string::npos) << g.error;
  }
}

TEST(Convergence, EmitReportIsDeterministicAndRoundTrips) {
  ConvergenceReport r;
  r.alpha = 3.0;
  r.config_hash = "abc";
  r.rungs = {synthetic_rung(0.2, 0.04), synthetic_rung(0.1, 0.011), synthetic_rung(0.05, 0.0024)};
  r.rates = estimate_rates(r);
  const fs::path a = fresh_dir("emit_a"), b = fresh_dir("emit_b");
  const EmitResult ea = emit_report(r, a.string());
  const EmitResult eb = emit_report(r, b.string());
  ASSERT_EQ(ea.files, eb.files);
  int svgs = 0;
  for (const auto& f : ea.files) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    svgs += f.ends_with(".svg") ? 1 : 0;
  }
  EXPECT_GE(svgs, 4);
  const std::string csv = slurp(a / "ladder.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);

  const ConvergenceReport back = read_ladder_csv((a / "ladder.csv").string());
  ASSERT_EQ(back.rungs.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.rungs[i].h, r.rungs[i].h);
    EXPECT_EQ(back.rungs[i].err_v2, r.rungs[i].err_v2);
    EXPECT_EQ(back.rungs[i].config_hash, "abc");
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Convergence, EmptyLadderWritesHeaderOnly) {
  const fs::path d = fresh_dir("emit_empty");
  const EmitResult e = emit_report(ConvergenceReport{}, d.string());
  EXPECT_FALSE(e.warnings.empty());
  for (const auto& f : e.files) EXPECT_FALSE(f.ends_with(".svg"));
  const std::string csv = slurp(d / "ladder.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1);
  fs::remove_all(d);
}

TEST(Convergence, UnwritableDirectoryIsAnIoError) {
  const fs::path file = fresh_dir("emit_blocker");
  std::ofstream(file.string()) << "x";
  EXPECT_THROW(emit_report(ConvergenceReport{}, (file / "sub").string()), IoError);
  fs::remove(file);
}
