#include "rodlim/convergence.hpp"

#include "rodlim/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>

namespace rodlim {

void LadderSpec::validate() const {
  if (h_values.empty()) throw InputError("ladder: h_values is empty");
  if (axial_elems.size() != h_values.size()) throw InputError("ladder: axial_elems must match h_values in length");
  for (std::size_t i = 0; i < h_values.size(); ++i) {
    if (!(h_values[i] > 0.0 && h_values[i] <= 1.0)) throw InputError("ladder: h values must lie in (0, 1]");
    if (i > 0 && !(h_values[i] < h_values[i - 1])) throw InputError("ladder: h values must be strictly decreasing");
    if (axial_elems[i] < 1) throw InputError("ladder: axial_elems must be >= 1");
  }
  if (!(std::isfinite(alpha) && alpha > 2.0)) throw InputError("ladder: alpha must be > 2");
  if (!(length > 0.0)) throw InputError("ladder: length must be > 0");
  if (rod_nodes < 4) throw InputError("ladder: rod_nodes must be >= 4");
  if (common_grid < 1) throw InputError("ladder: common_grid must be >= 1");
  if (!section) throw InputError("ladder: missing section");
  require_normalized(*section, "ladder");
}

double discrete_w12_norm(const std::vector<double>& values, double spacing) {
  double l2 = 0.0, d2 = 0.0;
  for (std::size_t j = 0; j + 1 < values.size(); ++j) {
    l2 += 0.5 * spacing * (values[j] * values[j] + values[j + 1] * values[j + 1]);
    const double d = (values[j + 1] - values[j]) / spacing;
    d2 += spacing * d * d;
  }
  return std::sqrt(l2 + d2);
}

namespace {

double interpolate(const std::vector<double>& x, const std::vector<double>& v, double t) {
  const auto it = std::upper_bound(x.begin(), x.end(), t);
  std::size_t i = it == x.begin() ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
  i = std::min(i, x.size() - 2);
  const double s = (t - x[i]) / (x[i + 1] - x[i]);
  return (1.0 - s) * v[i] + s * v[i + 1];
}

}  // namespace

ConvergenceReport run_ladder(const LadderSpec& spec, const RungCallback& on_rung) {
  spec.validate();
  ConvergenceReport report;
  report.alpha = spec.alpha;
  report.config_hash = spec.config_hash;

  const AlphaRegime regime(spec.alpha);
  const CellProblem cell(spec.section, spec.material.linearized());
  const ReducedStiffness stiffness = cell.reduced_stiffness();
  const RodState rod = solve_equilibrium(regime, stiffness, spec.loads, spec.length, spec.rod_nodes);
  report.reference_el_residual = el_residuals(rod, stiffness, spec.loads).max_el();
  if (!(report.reference_el_residual <= 1e-8))
    throw ConvergenceError("ladder: limit reference fails the equilibrium check (residual " +
                           format_double(report.reference_el_residual) + ")");

  const int ng = spec.common_grid;
  const double dg = spec.length / ng;
  std::vector<double> grid(ng + 1);
  for (int j = 0; j <= ng; ++j) grid[j] = spec.length * j / ng;

  std::optional<Observables> previous;
  for (std::size_t r = 0; r < spec.h_values.size(); ++r) {
    RungRecord rec;
    rec.h = spec.h_values[r];
    rec.axial_elems = spec.axial_elems[r];
    rec.config_hash = spec.config_hash;
    try {
      BeamConfig bc;
      bc.h = rec.h;
      bc.alpha = spec.alpha;
      bc.length = spec.length;
      bc.loads = spec.loads;
      bc.axial_elems = rec.axial_elems;
      bc.axial_order = spec.axial_order;
      bc.section = spec.section;
      bc.material = spec.material;
      bc.threads = spec.threads;
      const BeamProblem problem(bc);
      const DeformationField start = spec.warm_start && previous
                                         ? ansatz_deformation(problem.mesh(), spec.alpha,
                                                              rod_fields_from_observables(*previous))
                                         : DeformationField::reference(problem.mesh());
      const MinimizeResult res = minimize(problem, start, spec.solver);
      Observables obs = extract_observables(problem, res.field);
      obs.stationarity_residual = res.stationarity();
      const RotationFit fit = fit_rotations(problem, res.field);
      const MomentCurves mc = strain_stress_moments(problem, res.field, fit);
      const auto ov = outer_variation_residuals(problem, res.field);

      std::vector<double> eu(ng + 1), e2(ng + 1), e3(ng + 1), ew(ng + 1);
      for (int j = 0; j <= ng; ++j) {
        const double x = grid[j];
        eu[j] = interpolate(obs.x, obs.u, x) - rod.u_at(x);
        e2[j] = interpolate(obs.x, obs.v2, x) - rod.v(2, x);
        e3[j] = interpolate(obs.x, obs.v3, x) - rod.v(3, x);
        ew[j] = interpolate(obs.x, obs.w, x) - rod.w_at(x);
      }
      rec.err_u = discrete_w12_norm(eu, dg);
      rec.err_v2 = discrete_w12_norm(e2, dg);
      rec.err_v3 = discrete_w12_norm(e3, dg);
      rec.err_w = discrete_w12_norm(ew, dg);
      rec.energy = res.energy.total.value();
      rec.elastic_energy = res.energy.elastic;
      rec.scaling_ratio = res.energy.elastic / std::pow(rec.h, 2.0 * spec.alpha - 2.0);
      rec.rotation_l2 = fit.distance_l2;
      rec.rotation_derivative_l2 = fit.derivative_l2;
      rec.rotation_linf = fit.deviation_linf;
      rec.mean_stress_l2 = mc.mean_l2;
      rec.stress_symmetry = mc.symmetry_defect;
      rec.distance_w12 = distance_to_centerline(problem, res.field);
      rec.stationarity = res.stationarity();
      rec.outer_variation_max = *std::max_element(ov.begin(), ov.end());
      rec.iterations = res.iterations;
      rec.ok = true;
      if (on_rung) on_rung(rec, problem, res, obs);
      previous = std::move(obs);
    } catch (const ConvergenceError& e) {
      rec.ok = false;
      rec.error = e.what();
    } catch (const DomainError& e) {
      rec.ok = false;
      rec.error = e.what();
    }
    report.rungs.push_back(rec);
  }
  const auto ok_count = std::count_if(report.rungs.begin(), report.rungs.end(), [](const auto& r) { return r.ok; });
  if (ok_count >= 3) report.rates = estimate_rates(report);
  return report;
}

// ---------------------------------------------------------------------------

RateFit fit_rate(const std::string& observable, const std::vector<double>& h, const std::vector<double>& e) {
  if (h.size() != e.size()) throw InputError("fit_rate: size mismatch");
  if (h.size() < 3) throw InputError("fit_rate: insufficient data (need >= 3 rungs)");
  RateFit fit;
  fit.observable = observable;
  fit.decreasing = true;
  for (std::size_t i = 1; i < e.size(); ++i)
    if (!(e[i] < e[i - 1])) fit.decreasing = false;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < h.size(); ++i)
    if (h[i] > 0.0 && e[i] > 0.0 && std::isfinite(e[i])) {
      lx.push_back(std::log(h[i]));
      ly.push_back(std::log(e[i]));
    }
  fit.points = static_cast<int>(lx.size());
  if (lx.size() < 3) return fit;
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) return fit;
  fit.slope = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - my - fit.slope * (lx[i] - mx);
    rss += r * r;
  }
  fit.std_error = lx.size() > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
  fit.valid = true;
  return fit;
}

const std::vector<std::string>& tracked_observables() {
  static const std::vector<std::string> names = {
      "err_u",         "err_v2",         "err_v3",       "err_w",       "scaling_ratio",
      "rotation_l2",   "mean_stress_l2", "distance_w12", "rotation_derivative_l2"};
  return names;
}

double observable_value(const RungRecord& r, const std::string& name) {
  if (name == "err_u") return r.err_u;
  if (name == "err_v2") return r.err_v2;
  if (name == "err_v3") return r.err_v3;
  if (name == "err_w") return r.err_w;
  if (name == "scaling_ratio") return r.scaling_ratio;
  if (name == "rotation_l2") return r.rotation_l2;
  if (name == "mean_stress_l2") return r.mean_stress_l2;
  if (name == "distance_w12") return r.distance_w12;
  if (name == "rotation_derivative_l2") return r.rotation_derivative_l2;
  throw InputError("unknown observable '" + name + "'");
}

std::vector<RateFit> estimate_rates(const ConvergenceReport& report) {
  std::vector<const RungRecord*> ok;
  for (const auto& r : report.rungs)
    if (r.ok) ok.push_back(&r);
  if (ok.size() < 3) throw InputError("estimate_rates: insufficient data (need >= 3 successful rungs)");
  std::vector<RateFit> out;
  for (const auto& name : tracked_observables()) {
    std::vector<double> h, e;
    for (const auto* r : ok) {
      h.push_back(r->h);
      e.push_back(observable_value(*r, name));
    }
    out.push_back(fit_rate(name, h, e));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

const char* kCsvHeader =
    "h,axial_elems,status,alpha,err_u,err_v2,err_v3,err_w,energy,elastic_energy,scaling_ratio,rotation_l2,"
    "rotation_derivative_l2,rotation_linf,mean_stress_l2,stress_symmetry,distance_w12,stationarity,"
    "outer_variation_max,iterations,config_hash";

std::string svg_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string log_log_svg(const std::string& name, const std::vector<double>& h, const std::vector<double>& e,
                        const RateFit* fit) {
  const double W = 480, H = 360, ml = 70, mr = 20, mt = 40, mb = 50;
  const auto [hmin, hmax] = std::minmax_element(h.begin(), h.end());
  const auto [emin, emax] = std::minmax_element(e.begin(), e.end());
  double lx0 = std::floor(std::log10(*hmin)), lx1 = std::ceil(std::log10(*hmax));
  double ly0 = std::floor(std::log10(*emin)), ly1 = std::ceil(std::log10(*emax));
  if (lx1 <= lx0) lx1 = lx0 + 1;
  if (ly1 <= ly0) ly1 = ly0 + 1;
  auto px = [&](double v) { return ml + (std::log10(v) - lx0) / (lx1 - lx0) * (W - ml - mr); };
  auto py = [&](double v) { return H - mb - (std::log10(v) - ly0) / (ly1 - ly0) * (H - mt - mb); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
     << name << " vs h";
  if (fit && fit->valid) os << " (slope " << svg_number(fit->slope) << " &#177; " << svg_number(fit->std_error) << ")";
  os << "</text>\n";
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr << "\" height=\"" << H - mt - mb
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int d = static_cast<int>(lx0); d <= static_cast<int>(lx1); ++d) {
    const double x = px(std::pow(10.0, d));
    os << "<line x1=\"" << svg_number(x) << "\" y1=\"" << H - mb << "\" x2=\"" << svg_number(x) << "\" y2=\""
       << H - mb + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << svg_number(x) << "\" y=\"" << H - mb + 20
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">1e" << d << "</text>\n";
  }
  for (int d = static_cast<int>(ly0); d <= static_cast<int>(ly1); ++d) {
    const double y = py(std::pow(10.0, d));
    os << "<line x1=\"" << ml - 5 << "\" y1=\"" << svg_number(y) << "\" x2=\"" << ml << "\" y2=\"" << svg_number(y)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << svg_number(y + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e" << d << "</text>\n";
  }
  os << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 10
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">h</text>\n";
  os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < h.size(); ++i) os << (i ? " " : "") << svg_number(px(h[i])) << ',' << svg_number(py(e[i]));
  os << "\"/>\n";
  for (std::size_t i = 0; i < h.size(); ++i)
    os << "<circle cx=\"" << svg_number(px(h[i])) << "\" cy=\"" << svg_number(py(e[i]))
       << "\" r=\"3.5\" fill=\"#1f77b4\"/>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace

EmitResult emit_report(const ConvergenceReport& report, const std::string& out_dir) {
  ensure_directory(out_dir);
  const std::filesystem::path dir(out_dir);
  EmitResult result;

  std::ostringstream csv;
  csv << kCsvHeader << '\n';
  for (const auto& r : report.rungs) {
    csv << format_double(r.h) << ',' << r.axial_elems << ',' << (r.ok ? "ok" : "failed") << ','
        << format_double(report.alpha);
    for (double v : {r.err_u, r.err_v2, r.err_v3, r.err_w, r.energy, r.elastic_energy, r.scaling_ratio, r.rotation_l2,
                     r.rotation_derivative_l2, r.rotation_linf, r.mean_stress_l2, r.stress_symmetry, r.distance_w12,
                     r.stationarity, r.outer_variation_max})
      csv << ',' << format_double(v);
    csv << ',' << r.iterations << ',' << r.config_hash << '\n';
  }
  write_text_file((dir / "ladder.csv").string(), csv.str());
  result.files.push_back("ladder.csv");

  nlohmann::ordered_json rates;
  rates["alpha"] = report.alpha;
  rates["config_hash"] = report.config_hash;
  if (std::isfinite(report.reference_el_residual))
    rates["reference_el_residual"] = report.reference_el_residual;
  else
    rates["reference_el_residual"] = nullptr;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& f : report.rates) {
    nlohmann::ordered_json o;
    o["observable"] = f.observable;
    o["valid"] = f.valid;
    o["slope"] = f.slope;
    o["std_error"] = f.std_error;
    o["points"] = f.points;
    o["decreasing"] = f.decreasing;
    arr.push_back(o);
  }
  rates["rates"] = arr;
  nlohmann::ordered_json failed = nlohmann::ordered_json::array();
  for (const auto& r : report.rungs)
    if (!r.ok) failed.push_back({{"h", r.h}, {"error", r.error}});
  rates["failed_rungs"] = failed;
  write_text_file((dir / "rates.json").string(), rates.dump(2) + "\n");
  result.files.push_back("rates.json");

  if (report.rungs.empty()) {
    result.warnings.push_back("empty ladder: no plots written");
    return result;
  }
  for (const auto& name : tracked_observables()) {
    std::vector<double> h, e;
    for (const auto& r : report.rungs) {
      const double v = observable_value(r, name);
      if (r.ok && v > 0.0 && std::isfinite(v)) {
        h.push_back(r.h);
        e.push_back(v);
      }
    }
    if (h.empty()) {
      result.warnings.push_back("no positive data for " + name + ": plot skipped");
      continue;
    }
    const RateFit* fit = nullptr;
    for (const auto& f : report.rates)
      if (f.observable == name) fit = &f;
    const std::string file = "plot_" + name + ".svg";
    write_text_file((dir / file).string(), log_log_svg(name, h, e, fit));
    result.files.push_back(file);
  }
  return result;
}

ConvergenceReport read_ladder_csv(const std::string& path) {
  std::istringstream is(read_text_file(path));
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw InputError(path + ": unexpected ladder.csv header");
  ConvergenceReport report;
  report.reference_el_residual = std::numeric_limits<double>::quiet_NaN();
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 21) throw InputError(path + ": malformed row '" + line + "'");
    auto num = [&](int i) {
      try {
        return std::stod(cells[i]);
      } catch (const std::exception&) {
        throw InputError(path + ": bad number '" + cells[i] + "'");
      }
    };
    RungRecord r;
    r.h = num(0);
    r.axial_elems = static_cast<int>(num(1));
    r.ok = cells[2] == "ok";
    report.alpha = num(3);
    double* fields[] = {&r.err_u, &r.err_v2, &r.err_v3, &r.err_w, &r.energy, &r.elastic_energy, &r.scaling_ratio,
                        &r.rotation_l2, &r.rotation_derivative_l2, &r.rotation_linf, &r.mean_stress_l2,
                        &r.stress_symmetry, &r.distance_w12, &r.stationarity, &r.outer_variation_max};
    for (int i = 0; i < 15; ++i) *fields[i] = num(4 + i);
    r.iterations = static_cast<int>(num(19));
    r.config_hash = cells[20];
    report.config_hash = r.config_hash;
    report.rungs.push_back(r);
  }
  return report;
}

}  // namespace rodlim
