#include "rodlim/config.hpp"

#include "rodlim/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace rodlim {

namespace {

using json = nlohmann::json;

struct TomlReader {
  const std::string& text;
  std::size_t pos = 0;
  int line = 1;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigurationError("config line " + std::to_string(line) + ": " + msg);
  }
  bool at_end() const { return pos >= text.size(); }
  char peek() const { return at_end() ? '\0' : text[pos]; }
  void skip_inline_space() {
    while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos;
  }
  void skip_comment() {
    if (peek() == '#')
      while (!at_end() && peek() != '\n') ++pos;
  }
  // Whitespace, newlines and comments (inside arrays).
  void skip_all_space() {
    for (;;) {
      skip_inline_space();
      skip_comment();
      if (peek() == '\n') {
        ++pos;
        ++line;
        continue;
      }
      return;
    }
  }
  void expect_line_end() {
    skip_inline_space();
    skip_comment();
    if (at_end()) return;
    if (peek() != '\n') fail("unexpected trailing characters");
    ++pos;
    ++line;
  }
  std::string bare_key() {
    const std::size_t start = pos;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos;
    if (pos == start) fail("expected a key");
    return text.substr(start, pos - start);
  }
  std::string string_value() {
    ++pos;  // opening quote
    std::string out;
    while (!at_end() && peek() != '"') {
      char c = text[pos++];
      if (c == '\n') fail("unterminated string");
      if (c == '\\') {
        if (at_end()) fail("unterminated escape");
        const char e = text[pos++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (at_end()) fail("unterminated string");
    ++pos;
    return out;
  }
  json scalar_or_array() {
    const char c = peek();
    if (c == '"') return string_value();
    if (c == '[') {
      ++pos;
      json arr = json::array();
      skip_all_space();
      if (peek() == ']') {
        ++pos;
        return arr;
      }
      for (;;) {
        skip_all_space();
        arr.push_back(scalar_or_array());
        skip_all_space();
        if (peek() == ',') {
          ++pos;
          skip_all_space();
          if (peek() == ']') {
            ++pos;
            return arr;
          }
          continue;
        }
        if (peek() == ']') {
          ++pos;
          return arr;
        }
        fail("expected ',' or ']' in array");
      }
    }
    const std::size_t start = pos;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' || peek() == '+' ||
                         peek() == '-' || peek() == '_'))
      ++pos;
    std::string tok = text.substr(start, pos - start);
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    tok.erase(std::remove(tok.begin(), tok.end(), '_'), tok.end());
    const bool is_float = tok.find_first_of(".eE") != std::string::npos || tok == "inf" || tok == "+inf" ||
                          tok == "-inf" || tok == "nan";
    try {
      std::size_t used = 0;
      if (is_float) {
        const double v = std::stod(tok, &used);
        if (used == tok.size()) return v;
      } else {
        const long long v = std::stoll(tok, &used);
        if (used == tok.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("cannot parse value '" + tok + "'");
  }
};

}  // namespace

nlohmann::json parse_toml(const std::string& text) {
  TomlReader r{text};
  json root = json::object();
  json* table = &root;
  std::set<std::string> tables;
  while (true) {
    r.skip_all_space();
    if (r.at_end()) break;
    if (r.peek() == '[') {
      ++r.pos;
      r.skip_inline_space();
      const std::string name = r.bare_key();
      r.skip_inline_space();
      if (r.peek() != ']') r.fail("expected ']' after table name");
      ++r.pos;
      if (!tables.insert(name).second || root.contains(name)) r.fail("duplicate table [" + name + "]");
      root[name] = json::object();
      table = &root[name];
      r.expect_line_end();
      continue;
    }
    const std::string key = r.bare_key();
    r.skip_inline_space();
    if (r.peek() != '=') r.fail("expected '=' after key '" + key + "'");
    ++r.pos;
    r.skip_inline_space();
    if (table->contains(key)) r.fail("duplicate key '" + key + "'");
    (*table)[key] = r.scalar_or_array();
    r.expect_line_end();
  }
  return root;
}

namespace {

std::string toml_scalar(const json& v) {
  if (v.is_string()) {
    std::string out = "\"";
    for (char c : v.get<std::string>()) {
      if (c == '"' || c == '\\') out.push_back('\\');
      if (c == '\n') {
        out += "\\n";
        continue;
      }
      out.push_back(c);
    }
    return out + "\"";
  }
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_float()) {
    std::string s = format_double(v.get<double>());
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  }
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + toml_scalar(v[i]);
    return out + "]";
  }
  throw ConfigurationError("to_toml: unsupported value");
}

}  // namespace

std::string to_toml(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigurationError("to_toml: top level must be an object");
  std::ostringstream os;
  for (const auto& [k, v] : j.items())
    if (!v.is_object()) os << k << " = " << toml_scalar(v) << '\n';
  for (const auto& [k, v] : j.items()) {
    if (!v.is_object()) continue;
    os << "\n[" << k << "]\n";
    for (const auto& [k2, v2] : v.items()) {
      if (v2.is_object()) throw ConfigurationError("to_toml: nested tables are not supported");
      os << k2 << " = " << toml_scalar(v2) << '\n';
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

class Table {
 public:
  Table(const json& j, std::string name, std::set<std::string> allowed) : name_(std::move(name)) {
    if (j.is_null()) return;
    if (!j.is_object()) throw ConfigurationError("config: [" + name_ + "] must be a table");
    for (const auto& [k, v] : j.items())
      if (!allowed.count(k)) throw ConfigurationError("config: unknown key '" + qualified(k) + "'");
    j_ = j;
  }

  bool has(const std::string& k) const { return j_.contains(k); }

  double number(const std::string& k, double def) const {
    if (!has(k)) return def;
    if (!j_[k].is_number()) throw ConfigurationError("config: '" + qualified(k) + "' must be a number");
    const double v = j_[k].get<double>();
    if (!std::isfinite(v)) throw ConfigurationError("config: '" + qualified(k) + "' must be finite");
    return v;
  }
  long long integer(const std::string& k, long long def) const {
    if (!has(k)) return def;
    if (!j_[k].is_number_integer()) throw ConfigurationError("config: '" + qualified(k) + "' must be an integer");
    return j_[k].get<long long>();
  }
  bool boolean(const std::string& k, bool def) const {
    if (!has(k)) return def;
    if (!j_[k].is_boolean()) throw ConfigurationError("config: '" + qualified(k) + "' must be a boolean");
    return j_[k].get<bool>();
  }
  std::string string(const std::string& k, const std::string& def) const {
    if (!has(k)) return def;
    if (!j_[k].is_string()) throw ConfigurationError("config: '" + qualified(k) + "' must be a string");
    return j_[k].get<std::string>();
  }
  std::vector<double> numbers(const std::string& k, std::vector<double> def) const {
    if (!has(k)) return def;
    std::vector<double> out;
    if (!j_[k].is_array()) throw ConfigurationError("config: '" + qualified(k) + "' must be an array");
    for (const auto& v : j_[k]) {
      if (!v.is_number()) throw ConfigurationError("config: '" + qualified(k) + "' must contain numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }
  std::vector<int> integers(const std::string& k, std::vector<int> def) const {
    if (!has(k)) return def;
    std::vector<int> out;
    if (!j_[k].is_array()) throw ConfigurationError("config: '" + qualified(k) + "' must be an array");
    for (const auto& v : j_[k]) {
      if (!v.is_number_integer()) throw ConfigurationError("config: '" + qualified(k) + "' must contain integers");
      out.push_back(v.get<int>());
    }
    return out;
  }

 private:
  std::string qualified(const std::string& k) const { return name_.empty() ? k : name_ + "." + k; }
  json j_ = json::object();
  std::string name_;
};

const json& sub(const json& j, const char* key) {
  static const json null;
  return j.contains(key) ? j[key] : null;
}

Regime regime_from_string(const std::string& s) {
  if (s == "subcritical") return Regime::SubCritical;
  if (s == "critical") return Regime::Critical;
  if (s == "supercritical") return Regime::SuperCritical;
  throw ConfigurationError("config: rod.regime must be subcritical, critical or supercritical");
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigurationError("config: top level must be a table");
  const Table top(j, "", {"schema_version", "seed", "material", "section", "rod", "solver", "beam3d", "ladder", "output"});
  if (!top.has("schema_version")) throw ConfigurationError("config: missing key 'schema_version'");
  RunConfig c;
  c.schema_version = static_cast<int>(top.integer("schema_version", 0));
  if (c.schema_version != kConfigSchemaVersion)
    throw ConfigurationError("config: unsupported schema_version " + std::to_string(c.schema_version) +
                             " (expected " + std::to_string(kConfigSchemaVersion) + ")");
  const long long seed = top.integer("seed", 0);
  if (seed < 0) throw ConfigurationError("config: 'seed' must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);

  const Table mat(sub(j, "material"), "material", {"family", "mu", "lambda"});
  try {
    c.family = energy_family_from_string(mat.string("family", to_string(c.family)));
  } catch (const InputError& e) {
    throw ConfigurationError(std::string("config: material.family: ") + e.what());
  }
  c.moduli.mu = mat.number("mu", c.moduli.mu);
  c.moduli.lambda = mat.number("lambda", c.moduli.lambda);

  const Table sec(sub(j, "section"),
                  "section", {"generator", "rings", "radius", "width", "height", "nx", "ny", "n", "sides", "refine", "path"});
  SectionSpec& s = c.section;
  s.generator = sec.string("generator", s.generator);
  s.rings = static_cast<int>(sec.integer("rings", s.rings));
  s.radius = sec.number("radius", s.radius);
  s.width = sec.number("width", s.width);
  s.height = sec.number("height", s.height);
  s.nx = static_cast<int>(sec.integer("nx", s.nx));
  s.ny = static_cast<int>(sec.integer("ny", s.ny));
  s.n = static_cast<int>(sec.integer("n", s.n));
  s.sides = static_cast<int>(sec.integer("sides", s.sides));
  s.refine = static_cast<int>(sec.integer("refine", s.refine));
  s.path = sec.string("path", s.path);
  static const std::set<std::string> generators = {"disc", "rectangle", "square", "polygon", "mesh"};
  if (!generators.count(s.generator))
    throw ConfigurationError("config: section.generator must be one of disc, rectangle, square, polygon, mesh");
  if (s.generator == "mesh" && s.path.empty()) throw ConfigurationError("config: missing key 'section.path'");
  if (s.refine < 0 || s.refine > 4) throw ConfigurationError("config: section.refine must be in [0, 4]");

  const Table rod(sub(j, "rod"), "rod", {"alpha", "regime", "length", "nodes", "f2", "f3"});
  c.alpha = rod.number("alpha", c.alpha);
  if (rod.has("regime")) c.regime = regime_from_string(rod.string("regime", ""));
  c.length = rod.number("length", c.length);
  c.rod_nodes = static_cast<int>(rod.integer("nodes", c.rod_nodes));
  c.f2 = rod.string("f2", c.f2);
  c.f3 = rod.string("f3", c.f3);

  const Table sol(sub(j, "solver"), "solver", {"tol", "max_iterations"});
  c.tol = sol.number("tol", c.tol);
  c.max_iterations = static_cast<int>(sol.integer("max_iterations", c.max_iterations));

  const Table beam(sub(j, "beam3d"), "beam3d", {"h", "axial_elems", "axial_order"});
  c.h = beam.number("h", c.h);
  c.axial_elems = static_cast<int>(beam.integer("axial_elems", c.axial_elems));
  c.axial_order = static_cast<int>(beam.integer("axial_order", c.axial_order));

  const Table lad(sub(j, "ladder"), "ladder", {"h", "axial_elems", "common_grid", "warm_start", "rod_nodes"});
  c.ladder_h = lad.numbers("h", c.ladder_h);
  c.ladder_axial_elems = lad.integers("axial_elems", c.ladder_axial_elems);
  c.common_grid = static_cast<int>(lad.integer("common_grid", c.common_grid));
  c.warm_start = lad.boolean("warm_start", c.warm_start);
  c.ladder_rod_nodes = static_cast<int>(lad.integer("rod_nodes", c.ladder_rod_nodes));

  const Table out(sub(j, "output"), "output", {"dir"});
  c.output_dir = out.string("dir", c.output_dir);

  // Semantic checks, reported as configuration errors.
  try {
    c.moduli.validate();
    c.alpha_regime();
    c.loads();
  } catch (const InputError& e) {
    throw ConfigurationError(std::string("config: ") + e.what());
  }
  if (!(c.length > 0.0)) throw ConfigurationError("config: rod.length must be > 0");
  if (c.rod_nodes < 4) throw ConfigurationError("config: rod.nodes must be >= 4");
  if (!(c.tol > 0.0 && c.tol < 1.0)) throw ConfigurationError("config: solver.tol must lie in (0, 1)");
  if (c.max_iterations < 1) throw ConfigurationError("config: solver.max_iterations must be >= 1");
  if (!(c.h > 0.0 && c.h <= 1.0)) throw ConfigurationError("config: beam3d.h must lie in (0, 1]");
  if (c.axial_elems < 1) throw ConfigurationError("config: beam3d.axial_elems must be >= 1");
  if (c.axial_order != 1 && c.axial_order != 2) throw ConfigurationError("config: beam3d.axial_order must be 1 or 2");
  if (c.ladder_h.size() != c.ladder_axial_elems.size())
    throw ConfigurationError("config: ladder.h and ladder.axial_elems must have the same length");
  for (std::size_t i = 0; i < c.ladder_h.size(); ++i) {
    if (!(c.ladder_h[i] > 0.0 && c.ladder_h[i] <= 1.0)) throw ConfigurationError("config: ladder.h must lie in (0, 1]");
    if (i > 0 && !(c.ladder_h[i] < c.ladder_h[i - 1]))
      throw ConfigurationError("config: ladder.h must be strictly decreasing");
    if (c.ladder_axial_elems[i] < 1) throw ConfigurationError("config: ladder.axial_elems must be >= 1");
  }
  if (c.common_grid < 1) throw ConfigurationError("config: ladder.common_grid must be >= 1");
  if (c.ladder_rod_nodes < 4) throw ConfigurationError("config: ladder.rod_nodes must be >= 4");
  return c;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["schema_version"] = schema_version;
  j["seed"] = seed;
  j["material"] = {{"family", to_string(family)}, {"mu", moduli.mu}, {"lambda", moduli.lambda}};
  j["section"] = {{"generator", section.generator}, {"rings", section.rings}, {"radius", section.radius},
                  {"width", section.width},         {"height", section.height}, {"nx", section.nx},
                  {"ny", section.ny},               {"n", section.n},          {"sides", section.sides},
                  {"refine", section.refine},       {"path", section.path}};
  j["rod"] = {{"alpha", alpha},   {"regime", to_string(alpha_regime().regime())},
              {"length", length}, {"nodes", rod_nodes},
              {"f2", f2},         {"f3", f3}};
  j["solver"] = {{"tol", tol}, {"max_iterations", max_iterations}};
  j["beam3d"] = {{"h", h}, {"axial_elems", axial_elems}, {"axial_order", axial_order}};
  j["ladder"] = {{"h", ladder_h},
                 {"axial_elems", ladder_axial_elems},
                 {"common_grid", common_grid},
                 {"warm_start", warm_start},
                 {"rod_nodes", ladder_rod_nodes}};
  j["output"] = {{"dir", output_dir}};
  return j;
}

std::string RunConfig::hash() const {
  nlohmann::json j = to_json();
  j.erase("output");  // where results go does not change them
  return sha256_hex(j.dump());
}

RodLoads RunConfig::loads() const { return {LoadFunction::parse(f2), LoadFunction::parse(f3)}; }

StoredEnergy RunConfig::material() const { return StoredEnergy(family, moduli); }

AlphaRegime RunConfig::alpha_regime() const {
  return regime ? AlphaRegime::checked(*regime, alpha) : AlphaRegime(alpha);
}

RunConfig load_run_config(const std::string& path) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigurationError(path + ": " + e.what());
    }
  } else {
    j = parse_toml(text);
  }
  return RunConfig::from_json(j);
}

CrossSection build_section(const SectionSpec& spec) {
  auto positive = [](int v, const char* what) {
    if (v < 1) throw InputError(std::string("section: ") + what + " must be >= 1");
  };
  CrossSection raw = [&]() -> CrossSection {
    if (spec.generator == "disc") {
      positive(spec.rings, "rings");
      return sections::disc(spec.rings, spec.radius);
    }
    if (spec.generator == "rectangle") {
      positive(spec.nx, "nx");
      positive(spec.ny, "ny");
      return sections::rectangle(spec.width, spec.height, spec.nx, spec.ny);
    }
    if (spec.generator == "square") {
      positive(spec.n, "n");
      return sections::square(spec.n, spec.width);
    }
    if (spec.generator == "polygon") {
      positive(spec.rings, "rings");
      return sections::regular_polygon(spec.sides, spec.rings);
    }
    if (spec.generator == "mesh") return read_section_json(spec.path);
    throw InputError("section: unknown generator '" + spec.generator + "'");
  }();
  const double radius = spec.radius;
  for (int k = 0; k < spec.refine; ++k) {
    if (spec.generator == "disc")
      raw = sections::refine(raw, [radius](const Vec2& p) { return Vec2(p * (radius / p.norm())); });
    else
      raw = sections::refine(raw);
  }
  return normalize(raw);
}

}  // namespace rodlim
