#include "rodlim/io.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

namespace rodlim {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << content;
  if (!os) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::string sha256_hex(const std::string& data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw IoError("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_text_file(path)); }

// ---------------------------------------------------------------------------

void write_reduced_stiffness(const std::string& path, const ReducedStiffness& s, const IsotropicModuli& moduli) {
  std::ostringstream os;
  os << "{\n  \"schema_version\": 1,\n  \"E\": " << format_double(s.E_mod) << ",\n  \"Q1\": [";
  for (int i = 0; i < 3; ++i) {
    os << (i ? ",\n         [" : "[");
    for (int j = 0; j < 3; ++j) os << (j ? ", " : "") << format_double(s.Q1(i, j));
    os << "]";
  }
  os << "],\n  \"mu\": " << format_double(moduli.mu) << ",\n  \"lambda\": " << format_double(moduli.lambda) << "\n}\n";
  write_text_file(path, os.str());
}

ReducedStiffness read_reduced_stiffness(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("schema_version") || j["schema_version"] != 1)
    throw InputError(path + ": missing or unsupported schema_version");
  if (!j.contains("E") || !j["E"].is_number()) throw InputError(path + ": missing key 'E'");
  if (!j.contains("Q1") || !j["Q1"].is_array() || j["Q1"].size() != 3) throw InputError(path + ": missing key 'Q1'");
  ReducedStiffness s;
  s.E_mod = j["E"].get<double>();
  for (int i = 0; i < 3; ++i) {
    const auto& row = j["Q1"][i];
    if (!row.is_array() || row.size() != 3) throw InputError(path + ": Q1 must be 3x3");
    for (int k = 0; k < 3; ++k) {
      if (!row[k].is_number()) throw InputError(path + ": Q1 entries must be numbers");
      s.Q1(i, k) = row[k].get<double>();
    }
  }
  s.validate();
  return s;
}

void write_rod_state_csv(const std::string& path, const RodState& st) {
  std::ostringstream os;
  os << "x1,u,v2,v3,w,v2p,v3p\n";
  for (int i = 0; i < st.num_nodes(); ++i)
    os << format_double(st.x[i]) << ',' << format_double(st.u[i]) << ',' << format_double(st.v2[i]) << ','
       << format_double(st.v3[i]) << ',' << format_double(st.w[i]) << ',' << format_double(st.v2p[i]) << ','
       << format_double(st.v3p[i]) << '\n';
  write_text_file(path, os.str());
}

void write_residuals_json(const std::string& path, const ElResidualReport& r) {
  std::ostringstream os;
  os << "{\n"
     << "  \"moment_route\": \"" << r.moment_route << "\",\n"
     << "  \"eq1a\": " << format_double(r.eq1a) << ",\n"
     << "  \"eq1b\": " << format_double(r.eq1b) << ",\n"
     << "  \"eq2a\": " << format_double(r.eq2a) << ",\n"
     << "  \"eq2b\": " << format_double(r.eq2b) << ",\n"
     << "  \"eq3\": " << format_double(r.eq3) << ",\n"
     << "  \"eq3_literal\": " << (r.eq3_literal ? format_double(*r.eq3_literal) : std::string("null")) << ",\n"
     << "  \"scale\": " << format_double(r.scale) << ",\n"
     << "  \"max_el\": " << format_double(r.max_el()) << "\n}\n";
  write_text_file(path, os.str());
}

void write_observables_csv(const std::string& path, const Observables& obs) {
  std::ostringstream os;
  os << "x1,u_h,v2_h,v3_h,w_h\n";
  for (std::size_t i = 0; i < obs.x.size(); ++i)
    os << format_double(obs.x[i]) << ',' << format_double(obs.u[i]) << ',' << format_double(obs.v2[i]) << ','
       << format_double(obs.v3[i]) << ',' << format_double(obs.w[i]) << '\n';
  write_text_file(path, os.str());
}

void write_manifest(const std::string& dir, const std::string& command, const std::string& config_hash,
                    std::vector<std::string> relative_files) {
  std::sort(relative_files.begin(), relative_files.end());
  relative_files.erase(std::unique(relative_files.begin(), relative_files.end()), relative_files.end());
  nlohmann::ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["command"] = command;
  j["config_hash"] = config_hash;
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& f : relative_files) {
    const std::string full = (std::filesystem::path(dir) / f).string();
    files.push_back({{"path", f}, {"sha256", sha256_file(full)}});
  }
  j["files"] = files;
  write_text_file((std::filesystem::path(dir) / "manifest.json").string(), j.dump(2) + "\n");
}

}  // namespace rodlim
