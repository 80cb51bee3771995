#pragma once

#include <string>
#include <variant>
#include <vector>

namespace rodlim {

/// Scalar load density on (0, L).
///
/// Preset syntax (used by configs and the CLI):
///   const:c        f(x) = c
///   linear:a,b     f(x) = a + b x
///   sin:amp,k      f(x) = amp sin(k x)
/// Sampled loads are piecewise linear through (x_i, f_i).
class LoadFunction {
 public:
  struct Constant {
    double c;
  };
  struct Linear {
    double a, b;
  };
  struct Sine {
    double amp, k;
  };
  struct Sampled {
    std::vector<double> x, f;
  };

  LoadFunction() : rep_(Constant{0.0}) {}
  static LoadFunction constant(double c) { return LoadFunction(Constant{c}); }
  static LoadFunction linear(double a, double b) { return LoadFunction(Linear{a, b}); }
  static LoadFunction sine(double amp, double k) { return LoadFunction(Sine{amp, k}); }
  static LoadFunction sampled(std::vector<double> x, std::vector<double> f);
  /// Parses the preset syntax; throws InputError on malformed text.
  static LoadFunction parse(const std::string& spec);

  double operator()(double x) const;
  bool is_zero() const;
  LoadFunction scaled(double s) const;
  /// Canonical preset text (round-trips through parse for presets).
  std::string to_string() const;

 private:
  using Rep = std::variant<Constant, Linear, Sine, Sampled>;
  explicit LoadFunction(Rep rep) : rep_(std::move(rep)) {}
  Rep rep_;
};

/// Normal loads f2, f3 (force per unit length).
struct RodLoads {
  LoadFunction f2;
  LoadFunction f3;

  bool is_zero() const { return f2.is_zero() && f3.is_zero(); }
  RodLoads scaled(double s) const { return {f2.scaled(s), f3.scaled(s)}; }
};

}  // namespace rodlim
