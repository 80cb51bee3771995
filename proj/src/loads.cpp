#include "rodlim/loads.hpp"

#include "rodlim/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace rodlim {

namespace {

std::vector<double> parse_numbers(const std::string& text, const std::string& spec) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw InputError("load preset '" + spec + "': cannot parse number '" + item + "'");
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size() || !std::isfinite(v))
      throw InputError("load preset '" + spec + "': cannot parse number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

LoadFunction LoadFunction::sampled(std::vector<double> x, std::vector<double> f) {
  if (x.size() != f.size() || x.size() < 2) throw InputError("sampled load: need >= 2 matching samples");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(f[i])) throw InputError("sampled load: non-finite sample");
    if (i > 0 && !(x[i] > x[i - 1])) throw InputError("sampled load: abscissae must be strictly increasing");
  }
  return LoadFunction(Sampled{std::move(x), std::move(f)});
}

LoadFunction LoadFunction::parse(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw InputError("load preset '" + spec + "': expected kind:params");
  const std::string kind = spec.substr(0, colon);
  const std::vector<double> p = parse_numbers(spec.substr(colon + 1), spec);
  if (kind == "const" && p.size() == 1) return constant(p[0]);
  if (kind == "linear" && p.size() == 2) return linear(p[0], p[1]);
  if (kind == "sin" && p.size() == 2) return sine(p[0], p[1]);
  throw InputError("load preset '" + spec + "': expected const:c, linear:a,b or sin:amp,k");
}

double LoadFunction::operator()(double x) const {
  return std::visit(
      [x](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return r.c;
        } else if constexpr (std::is_same_v<T, Linear>) {
          return r.a + r.b * x;
        } else if constexpr (std::is_same_v<T, Sine>) {
          return r.amp * std::sin(r.k * x);
        } else {
          if (x <= r.x.front()) return r.f.front();
          if (x >= r.x.back()) return r.f.back();
          const auto it = std::upper_bound(r.x.begin(), r.x.end(), x);
          const std::size_t i = static_cast<std::size_t>(it - r.x.begin()) - 1;
          const double s = (x - r.x[i]) / (r.x[i + 1] - r.x[i]);
          return (1.0 - s) * r.f[i] + s * r.f[i + 1];
        }
      },
      rep_);
}

bool LoadFunction::is_zero() const {
  return std::visit(
      [](const auto& r) -> bool {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return r.c == 0.0;
        } else if constexpr (std::is_same_v<T, Linear>) {
          return r.a == 0.0 && r.b == 0.0;
        } else if constexpr (std::is_same_v<T, Sine>) {
          return r.amp == 0.0;
        } else {
          return std::all_of(r.f.begin(), r.f.end(), [](double v) { return v == 0.0; });
        }
      },
      rep_);
}

LoadFunction LoadFunction::scaled(double s) const {
  return std::visit(
      [s](const auto& r) -> LoadFunction {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return constant(s * r.c);
        } else if constexpr (std::is_same_v<T, Linear>) {
          return linear(s * r.a, s * r.b);
        } else if constexpr (std::is_same_v<T, Sine>) {
          return sine(s * r.amp, r.k);
        } else {
          std::vector<double> f = r.f;
          for (auto& v : f) v *= s;
          return sampled(r.x, f);
        }
      },
      rep_);
}

std::string LoadFunction::to_string() const {
  return std::visit(
      [](const auto& r) -> std::string {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return "const:" + fmt(r.c);
        } else if constexpr (std::is_same_v<T, Linear>) {
          return "linear:" + fmt(r.a) + "," + fmt(r.b);
        } else if constexpr (std::is_same_v<T, Sine>) {
          return "sin:" + fmt(r.amp) + "," + fmt(r.k);
        } else {
          return "sampled:" + std::to_string(r.x.size());
        }
      },
      rep_);
}

}  // namespace rodlim
