// rodlim: command-line driver for the rod dimension-reduction toolkit.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure.

#include "rodlim/beam3d.hpp"
#include "rodlim/cell_problem.hpp"
#include "rodlim/config.hpp"
#include "rodlim/convergence.hpp"
#include "rodlim/io.hpp"
#include "rodlim/rod_model.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rodlim;
using ojson = nlohmann::ordered_json;

namespace {

struct Options {
  std::string config_path;
  std::string out_dir;
  int threads = 1;
  bool quiet = false;
};

struct Run {
  std::string dir;
  std::string command;
  std::vector<std::string> files;

  std::string path(const std::string& rel) const { return (fs::path(dir) / rel).string(); }
  void add(const std::string& rel) { files.push_back(rel); }
  void write_json(const std::string& rel, const ojson& j) {
    write_text_file(path(rel), j.dump(2) + "\n");
    add(rel);
  }
};

// Doubles go through format_double so the bytes do not depend on the json
// library's float printer.
ojson num(double v) { return ojson::parse(std::isfinite(v) ? format_double(v) : "null"); }

ojson mat_json(const Mat3& m) {
  ojson rows = ojson::array();
  for (int i = 0; i < 3; ++i) {
    ojson row = ojson::array();
    for (int j = 0; j < 3; ++j) row.push_back(num(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

RunConfig load_config(const Options& opt) {
  RunConfig cfg = opt.config_path.empty() ? RunConfig::from_json({{"schema_version", kConfigSchemaVersion}})
                                          : load_run_config(opt.config_path);
  if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
  return cfg;
}

/// Creates the output directory and writes the config snapshot. The output
/// location is not part of the snapshot, so reruns elsewhere hash the same.
Run begin_run(const std::string& command, const RunConfig& cfg) {
  if (cfg.output_dir.empty()) throw ConfigurationError("missing key 'output.dir' (or pass --out)");
  Run run{cfg.output_dir, command, {}};
  ensure_directory(run.dir);
  nlohmann::json snap = cfg.to_json();
  snap.erase("output");
  write_text_file(run.path("config_snapshot.toml"), to_toml(snap));
  run.add("config_snapshot.toml");
  return run;
}

void finish_run(const Run& run, const std::string& config_hash, const Options& opt) {
  write_manifest(run.dir, run.command, config_hash, run.files);
  if (!opt.quiet) std::cout << "wrote " << run.dir << " (" << run.files.size() + 1 << " files)\n";
}

std::shared_ptr<const CrossSection> section_of(const RunConfig& cfg) {
  return std::make_shared<const CrossSection>(build_section(cfg.section));
}

ojson section_json(const CrossSection& s) {
  const SectionMoments m = moments(s);
  ojson j;
  j["vertices"] = s.num_vertices();
  j["triangles"] = s.num_triangles();
  j["area"] = num(m.area);
  j["I2"] = num(m.I2);
  j["I3"] = num(m.I3);
  j["I23"] = num(m.I23);
  j["muS"] = num(m.muS);
  j["normalized"] = s.is_normalized();
  j["min_edge"] = num(s.min_edge_length());
  j["max_edge"] = num(s.max_edge_length());
  return j;
}

// ---------------------------------------------------------------------------

int cmd_material_check(const Options& opt, long long samples) {
  const RunConfig cfg = load_config(opt);
  if (samples < 1) throw InputError("--samples must be >= 1");
  Run run = begin_run("material check", cfg);
  const StoredEnergy w = cfg.material();
  const double mu = cfg.moduli.mu, lambda = cfg.moduli.lambda;

  ojson j;
  j["family"] = to_string(cfg.family);
  j["mu"] = num(mu);
  j["lambda"] = num(lambda);
  j["young_modulus"] = num(young_modulus(w.linearized()));
  j["young_modulus_closed_form"] = num(mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu));
  ojson probes = ojson::array();
  for (const ProbeRecord& p : probe_hypotheses(w, samples, cfg.seed))
    probes.push_back({{"hypothesis", p.hypothesis},
                      {"max_violation", num(p.max_violation)},
                      {"fitted_constant", num(p.fitted_constant)},
                      {"samples", p.samples},
                      {"seed", p.seed}});
  j["probes"] = probes;
  run.write_json("material_check.json", j);
  finish_run(run, cfg.hash(), opt);
  return 0;
}

int cmd_section_info(const Options& opt, const std::string& mesh_path) {
  RunConfig cfg = load_config(opt);
  if (!mesh_path.empty()) {
    cfg.section = SectionSpec{};
    cfg.section.generator = "mesh";
    cfg.section.path = mesh_path;
  }
  Run run = begin_run("section info", cfg);
  ojson j;
  if (cfg.section.generator == "mesh") {
    const CrossSection raw = read_section_json(cfg.section.path);
    j["input"] = section_json(raw);
  }
  const CrossSection s = build_section(cfg.section);
  j["normalized_section"] = section_json(s);
  run.write_json("section_info.json", j);
  write_section_json(s, run.path("section.json"));
  run.add("section.json");
  finish_run(run, cfg.hash(), opt);
  return 0;
}

int cmd_cell_solve(const Options& opt) {
  const RunConfig cfg = load_config(opt);
  Run run = begin_run("cell solve", cfg);
  const auto section = section_of(cfg);
  const CellProblem cell(section, cfg.material().linearized());
  const ReducedStiffness q = cell.reduced_stiffness();
  q.validate();
  write_reduced_stiffness(run.path("reduced_stiffness.json"), q, cfg.moduli);
  run.add("reduced_stiffness.json");
  write_section_json(*section, run.path("section.json"));
  run.add("section.json");

  ojson unit = ojson::array();
  const char* names[3] = {"bend2", "bend3", "twist"};
  for (int k = 0; k < 3; ++k) {
    SkewParam f;
    (k == 0 ? f.a : k == 1 ? f.b : f.c) = 1.0;
    const CellSolution sol = cell.solve(f);
    unit.push_back({{"case", names[k]},
                    {"energy", num(sol.energy)},
                    {"constraint_residual", num(sol.constraint_residual)},
                    {"neumann_residual", num(verify_neumann(*section, cell.stress(f, sol.warp)))}});
  }
  ojson j;
  j["E"] = num(q.E_mod);
  j["Q1"] = mat_json(q.Q1);
  j["section"] = section_json(*section);
  j["unit_solves"] = unit;
  run.write_json("cell_info.json", j);
  finish_run(run, cfg.hash(), opt);
  return 0;
}

int cmd_rod_solve(const Options& opt, const std::string& stiffness_path) {
  const RunConfig cfg = load_config(opt);
  const ReducedStiffness q = read_reduced_stiffness(stiffness_path);
  Run run = begin_run("rod solve", cfg);
  const AlphaRegime regime = cfg.alpha_regime();
  const RodLoads loads = cfg.loads();
  const RodState st = solve_equilibrium(regime, q, loads, cfg.length, cfg.rod_nodes);
  const ElResidualReport el = el_residuals(st, q, loads);
  write_rod_state_csv(run.path("rod_state.csv"), st);
  run.add("rod_state.csv");
  write_residuals_json(run.path("el_residuals.json"), el);
  run.add("el_residuals.json");

  ojson j;
  j["regime"] = to_string(regime.regime());
  j["alpha"] = num(regime.alpha());
  j["stiffness_sha256"] = sha256_file(stiffness_path);
  j["energy"] = num(energy_alpha(st, regime, q, loads).as_double());
  j["v2_tip"] = num(st.v2.back());
  j["v3_tip"] = num(st.v3.back());
  j["w_tip"] = num(st.w.back());
  j["u_tip"] = num(st.u.back());
  j["stretch_residual"] = num(stretch_residual(st));
  j["axial_strain_norm"] = num(axial_strain_norm(st));
  run.write_json("rod_summary.json", j);
  finish_run(run, cfg.hash(), opt);
  return 0;
}

BeamConfig beam_config(const RunConfig& cfg, int threads) {
  BeamConfig bc;
  bc.h = cfg.h;
  bc.alpha = cfg.alpha_regime().alpha();
  bc.length = cfg.length;
  bc.loads = cfg.loads();
  bc.axial_elems = cfg.axial_elems;
  bc.axial_order = cfg.axial_order;
  bc.section = section_of(cfg);
  bc.material = cfg.material();
  bc.threads = threads;
  return bc;
}

ojson beam_diagnostics(const BeamProblem& problem, const MinimizeResult& res, const Observables& obs) {
  const RotationFit fit = fit_rotations(problem, res.field);
  const MomentCurves mc = strain_stress_moments(problem, res.field, fit);
  const auto ov = outer_variation_residuals(problem, res.field);
  ojson j;
  j["h"] = num(problem.config().h);
  j["alpha"] = num(problem.config().alpha);
  j["axial_elems"] = problem.config().axial_elems;
  j["axial_order"] = problem.config().axial_order;
  j["energy"] = num(res.energy.total.as_double());
  j["elastic_energy"] = num(res.energy.elastic);
  j["load_work"] = num(res.energy.load_work);
  j["scaling_ratio"] = num(res.scaling_ratio);
  j["min_det"] = num(res.energy.min_det);
  j["grad_norm"] = num(res.grad_norm);
  j["grad_norm0"] = num(res.grad_norm0);
  j["stationarity"] = num(res.stationarity());
  j["iterations"] = res.iterations;
  j["shifted_factorizations"] = res.shifted_factorizations;
  j["rotation_l2"] = num(fit.distance_l2);
  j["rotation_derivative_l2"] = num(fit.derivative_l2);
  j["rotation_linf"] = num(fit.deviation_linf);
  j["rotation_orthogonality_defect"] = num(fit.orthogonality_defect);
  j["mean_stress_l2"] = num(mc.mean_l2);
  j["first_moment_l2"] = num(mc.first_l2);
  j["strain_l2"] = num(mc.strain_l2);
  j["stress_symmetry_defect"] = num(mc.symmetry_defect);
  ojson ovj = ojson::array();
  for (double r : ov) ovj.push_back(num(r));
  j["outer_variation"] = ovj;
  j["distance_w12"] = num(distance_to_centerline(problem, res.field));
  return j;
}

int cmd_beam3d_minimize(const Options& opt) {
  const RunConfig cfg = load_config(opt);
  Run run = begin_run("beam3d minimize", cfg);
  const BeamProblem problem(beam_config(cfg, opt.threads));
  MinimizeOptions mo;
  mo.tol = cfg.tol;
  mo.max_iterations = cfg.max_iterations;
  if (!opt.quiet)
    mo.monitor = [](int it, double e, double g, double t) {
      std::cerr << "  it " << it << "  J " << format_double(e) << "  |g| " << format_double(g) << "  t "
                << format_double(t) << '\n';
    };
  const MinimizeResult res = minimize(problem, mo);
  const Observables obs = extract_observables(problem, res.field);
  write_deformation(run.path("deformation.bin"), problem.mesh(), problem.config().alpha, res.field);
  run.add("deformation.bin");
  write_observables_csv(run.path("observables.csv"), obs);
  run.add("observables.csv");
  run.write_json("diagnostics.json", beam_diagnostics(problem, res, obs));
  finish_run(run, cfg.hash(), opt);
  return 0;
}

std::string rung_dir_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "rung_%02zu", index);
  return buf;
}

int cmd_converge_run(const Options& opt) {
  const RunConfig cfg = load_config(opt);
  Run run = begin_run("converge run", cfg);
  LadderSpec spec;
  spec.h_values = cfg.ladder_h;
  spec.axial_elems = cfg.ladder_axial_elems;
  spec.alpha = cfg.alpha_regime().alpha();
  spec.length = cfg.length;
  spec.loads = cfg.loads();
  spec.section = section_of(cfg);
  spec.material = cfg.material();
  spec.axial_order = cfg.axial_order;
  spec.rod_nodes = cfg.ladder_rod_nodes;
  spec.common_grid = cfg.common_grid;
  spec.warm_start = cfg.warm_start;
  spec.threads = opt.threads;
  spec.solver.tol = cfg.tol;
  spec.solver.max_iterations = cfg.max_iterations;
  spec.config_hash = cfg.hash();

  auto on_rung = [&](const RungRecord& rec, const BeamProblem& problem, const MinimizeResult& res,
                     const Observables& obs) {
    std::size_t index = 0;
    while (index < spec.h_values.size() && spec.h_values[index] != rec.h) ++index;
    const std::string sub = rung_dir_name(index);
    ensure_directory(run.path(sub));
    write_observables_csv(run.path(sub + "/observables.csv"), obs);
    run.add(sub + "/observables.csv");
    run.write_json(sub + "/diagnostics.json", beam_diagnostics(problem, res, obs));
    if (!opt.quiet)
      std::cerr << "rung h=" << format_double(rec.h) << "  err_v2 " << format_double(rec.err_v2) << "  iterations "
                << rec.iterations << '\n';
  };
  ConvergenceReport report = run_ladder(spec, on_rung);

  int ok = 0;
  for (const RungRecord& r : report.rungs) {
    if (r.ok) {
      ++ok;
    } else {
      std::cerr << "warning: rung h=" << format_double(r.h) << " failed: " << r.error << '\n';
    }
  }
  if (ok >= 3)
    report.rates = estimate_rates(report);
  else
    std::cerr << "warning: " << ok << " successful rungs, rates not estimated\n";
  const EmitResult emitted = emit_report(report, run.dir);
  for (const auto& w : emitted.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& f : emitted.files) run.add(f);
  finish_run(run, cfg.hash(), opt);
  return ok == static_cast<int>(report.rungs.size()) ? 0 : 2;
}

int cmd_report_plot(const Options& opt, const std::string& ladder_path) {
  if (opt.out_dir.empty()) throw ConfigurationError("missing key 'output.dir' (pass --out)");
  ConvergenceReport report = read_ladder_csv(ladder_path);
  Run run{opt.out_dir, "report plot", {}};
  ensure_directory(run.dir);
  // The ladder file is the only input of this command.
  const std::string input_hash = sha256_file(ladder_path);
  nlohmann::json snap;
  snap["schema_version"] = kConfigSchemaVersion;
  snap["report"] = {{"ladder", ladder_path}, {"ladder_sha256", input_hash}};
  write_text_file(run.path("config_snapshot.toml"), to_toml(snap));
  run.add("config_snapshot.toml");

  int ok = 0;
  for (const RungRecord& r : report.rungs) ok += r.ok ? 1 : 0;
  if (ok >= 3)
    report.rates = estimate_rates(report);
  else
    std::cerr << "warning: " << ok << " successful rungs, rates not estimated\n";
  const EmitResult emitted = emit_report(report, run.dir);
  for (const auto& w : emitted.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& f : emitted.files) run.add(f);
  finish_run(run, sha256_hex(nlohmann::json(snap).dump()), opt);
  return 0;
}

int report_error(const char* kind, const std::string& message, int code) {
  ojson j;
  j["status"] = "error";
  j["kind"] = kind;
  j["message"] = message;
  std::cerr << j.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dimension reduction toolkit for thin elastic rods", "rodlim"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  Options opt;
  app.add_option("--threads", opt.threads, "Worker threads for element loops")->check(CLI::Range(1, 256));
  app.add_flag("-q,--quiet", opt.quiet, "Suppress progress output");

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config_path, "Run configuration (.toml or .json)");
    cmd->add_option("--out", opt.out_dir, "Output directory");
  };

  std::function<int()> action;

  CLI::App* material = app.add_subcommand("material", "Stored-energy checks");
  material->require_subcommand(1);
  long long samples = 2000;
  CLI::App* material_check = material->add_subcommand("check", "Young's modulus and sampled hypotheses");
  add_common(material_check);
  material_check->add_option("--samples", samples, "Samples per probe");
  material_check->callback([&] { action = [&] { return cmd_material_check(opt, samples); }; });

  CLI::App* section = app.add_subcommand("section", "Cross-section utilities");
  section->require_subcommand(1);
  std::string mesh_path;
  CLI::App* section_info = section->add_subcommand("info", "Moments of a section mesh");
  add_common(section_info);
  section_info->add_option("mesh", mesh_path, "Section mesh (JSON); defaults to the configured section");
  section_info->callback([&] { action = [&] { return cmd_section_info(opt, mesh_path); }; });

  CLI::App* cell = app.add_subcommand("cell", "Cell problem");
  cell->require_subcommand(1);
  CLI::App* cell_solve = cell->add_subcommand("solve", "Relaxed stiffness E and Q1");
  add_common(cell_solve);
  cell_solve->callback([&] { action = [&] { return cmd_cell_solve(opt); }; });

  CLI::App* rod = app.add_subcommand("rod", "One-dimensional limit model");
  rod->require_subcommand(1);
  std::string stiffness_path;
  CLI::App* rod_solve = rod->add_subcommand("solve", "Stationary point of the limit energy");
  add_common(rod_solve);
  rod_solve->add_option("--stiffness", stiffness_path, "reduced_stiffness.json from 'cell solve'")->required();
  rod_solve->callback([&] { action = [&] { return cmd_rod_solve(opt, stiffness_path); }; });

  CLI::App* beam = app.add_subcommand("beam3d", "Finite-thickness problem");
  beam->require_subcommand(1);
  CLI::App* beam_min = beam->add_subcommand("minimize", "Minimize the rescaled 3D energy");
  add_common(beam_min);
  beam_min->callback([&] { action = [&] { return cmd_beam3d_minimize(opt); }; });

  CLI::App* converge = app.add_subcommand("converge", "h-ladder studies");
  converge->require_subcommand(1);
  CLI::App* converge_run = converge->add_subcommand("run", "Run a ladder and report rates");
  converge_run->add_option("--spec,--config", opt.config_path, "Ladder configuration (.toml or .json)")->required();
  converge_run->add_option("--out", opt.out_dir, "Output directory");
  converge_run->callback([&] { action = [&] { return cmd_converge_run(opt); }; });

  CLI::App* report = app.add_subcommand("report", "Reports from existing runs");
  report->require_subcommand(1);
  std::string ladder_path;
  CLI::App* report_plot = report->add_subcommand("plot", "Rates and plots from ladder.csv");
  report_plot->add_option("--ladder", ladder_path, "ladder.csv from 'converge run'")->required();
  report_plot->add_option("--out", opt.out_dir, "Output directory")->required();
  report_plot->callback([&] { action = [&] { return cmd_report_plot(opt, ladder_path); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 1);
  }

  try {
    return action ? action() : report_error("usage", "no command given", 1);
  } catch (const ConfigurationError& e) {
    return report_error("config", e.what(), 1);
  } catch (const InputError& e) {
    return report_error("input", e.what(), 1);
  } catch (const MeshError& e) {
    return report_error("mesh", e.what(), 1);
  } catch (const IoError& e) {
    return report_error("io", e.what(), 1);
  } catch (const ConvergenceError& e) {
    return report_error("convergence", e.what(), 2);
  } catch (const DomainError& e) {
    return report_error("domain", e.what(), 2);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 2);
  }
}
