#pragma once

#include "rodlim/convergence.hpp"
#include "rodlim/cross_section.hpp"
#include "rodlim/loads.hpp"
#include "rodlim/material.hpp"
#include "rodlim/rod_model.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rodlim {

/// Parses the TOML subset used by run configs: comments, [table] headers,
/// key = value with strings, integers, floats, booleans and (possibly
/// multi-line) arrays of those. Throws ConfigurationError with the line number.
nlohmann::json parse_toml(const std::string& text);
/// Inverse of parse_toml for the same subset (tables of scalars and arrays).
std::string to_toml(const nlohmann::json& j);

inline constexpr int kConfigSchemaVersion = 1;

struct SectionSpec {
  std::string generator = "disc";  ///< disc | rectangle | square | polygon | mesh
  int rings = 4;
  double radius = 1.0;
  double width = 1.0, height = 1.0;
  int nx = 8, ny = 8;
  int n = 8;
  int sides = 6;
  int refine = 0;
  std::string path;
};

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 0;

  EnergyFamily family = EnergyFamily::CompressibleNeoHookean;
  IsotropicModuli moduli;

  SectionSpec section;

  double alpha = 3.0;
  std::optional<Regime> regime;
  double length = 1.0;
  int rod_nodes = 65;
  std::string f2 = "const:0";
  std::string f3 = "const:0";

  double tol = 1e-9;
  int max_iterations = 60;

  double h = 0.1;
  int axial_elems = 16;
  int axial_order = 2;

  std::vector<double> ladder_h = {0.2, 0.1, 0.05};
  std::vector<int> ladder_axial_elems = {16, 32, 64};
  int common_grid = 16;
  bool warm_start = true;
  int ladder_rod_nodes = 129;

  std::string output_dir;

  /// Validates the schema (unknown keys, types, ranges) and fills defaults.
  static RunConfig from_json(const nlohmann::json& j);
  /// Canonical, complete form (every key present).
  nlohmann::json to_json() const;
  /// SHA-256 of the canonical JSON text.
  std::string hash() const;

  RodLoads loads() const;
  StoredEnergy material() const;
  AlphaRegime alpha_regime() const;
};

/// .json files are parsed as JSON, anything else as the TOML subset.
RunConfig load_run_config(const std::string& path);

/// Builds the section described by a SectionSpec and normalizes it.
CrossSection build_section(const SectionSpec& spec);

}  // namespace rodlim
