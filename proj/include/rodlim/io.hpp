#pragma once

#include "rodlim/beam3d.hpp"
#include "rodlim/cell_problem.hpp"
#include "rodlim/rod_model.hpp"

#include <string>
#include <vector>

namespace rodlim {

inline constexpr const char* kToolName = "rodlim";
inline constexpr const char* kToolVersion = "1.0.0";

/// %.17g; non-finite values are written as inf, -inf, nan.
std::string format_double(double v);

void ensure_directory(const std::string& dir);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::string& path);

/// {"schema_version":1,"E":..,"Q1":[[..],[..],[..]],"mu":..,"lambda":..}
void write_reduced_stiffness(const std::string& path, const ReducedStiffness& s, const IsotropicModuli& moduli);
/// Loads E and Q1 (no warp basis). Throws InputError on malformed content.
ReducedStiffness read_reduced_stiffness(const std::string& path);

/// Columns x1,u,v2,v3,w,v2p,v3p at the rod nodes.
void write_rod_state_csv(const std::string& path, const RodState& state);
void write_residuals_json(const std::string& path, const ElResidualReport& r);
/// Columns x1,u_h,v2_h,v3_h,w_h.
void write_observables_csv(const std::string& path, const Observables& obs);

/// manifest.json: tool, version, command, config_hash and the SHA-256 of every
/// listed output file (paths relative to dir, sorted). No timestamps.
void write_manifest(const std::string& dir, const std::string& command, const std::string& config_hash,
                    std::vector<std::string> relative_files);

}  // namespace rodlim
