#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace metapop {

class Landscape;

/// f(s) = lambda * s
struct LinearRate {
  double lambda = 1.0;
};
/// f(s) = c
struct ConstantRate {
  double value = 1.0;
};
/// f(s) = s^2 / (s^2 + y^2)
struct HillRate {
  double half_saturation = 1.0;
};
/// f(s) = e * (1 - s^2 / (s^2 + y^2)): extinction falling with connectivity.
struct RescueRate {
  double e = 1.0;
  double half_saturation = 1.0;
};

using RateFunction = std::variant<LinearRate, ConstantRate, HillRate, RescueRate>;

double evaluate(const RateFunction& f, double s) noexcept;

/// sup of f over [0, s_max], in closed form.
double supremum(const RateFunction& f, double s_max) noexcept;

/// Lipschitz constant of f on [0, s_max], in closed form.
double lipschitz(const RateFunction& f, double s_max) noexcept;

/// Parses `linear(2.0)`, `const(1.0)`, `hill(0.5)`, `rescue(1.0, 0.5)`.
RateFunction parse_rate(const std::string& text);
std::string to_string(const RateFunction& f);

/// Per-patch colonisation and extinction functions of connectivity.
class RateModel {
 public:
  RateModel(std::vector<RateFunction> colonisation, std::vector<RateFunction> extinction);

  /// Same pair of functions on every one of n patches.
  static RateModel uniform(std::size_t n, RateFunction colonisation, RateFunction extinction);

  std::size_t size() const noexcept { return colonisation_.size(); }
  const RateFunction& colonisation(std::size_t i) const noexcept { return colonisation_[i]; }
  const RateFunction& extinction(std::size_t i) const noexcept { return extinction_[i]; }

  double colonisation_rate(std::size_t i, double s) const noexcept { return evaluate(colonisation_[i], s); }
  double extinction_rate(std::size_t i, double s) const noexcept { return evaluate(extinction_[i], s); }

 private:
  std::vector<RateFunction> colonisation_;
  std::vector<RateFunction> extinction_;
};

struct Rates {
  std::vector<double> colonisation;
  std::vector<double> extinction;
};

/// C_i = f_{C,i}(S_i), E_i = f_{E,i}(S_i). Throws on negative connectivity.
Rates eval_rates(const RateModel& model, std::span<const double> connectivity);

struct LipschitzConstants {
  std::vector<double> colonisation;
  std::vector<double> extinction;
  std::vector<double> total;
};

LipschitzConstants lipschitz_constants(const RateModel& model, std::span<const double> s_max);

/// Per-patch suprema of the colonisation and extinction rates over [0, S_max_i].
Rates rate_suprema(const RateModel& model, std::span<const double> s_max);

struct TimestepViolation {
  std::size_t patch;
  double supremum;
};

/// Checks m^{-1} max_i sup max{f_C, f_E} <= 1 over the reachable connectivity
/// range. Returns the first violating patch, or nullopt when the step is valid.
std::optional<TimestepViolation> validate_timestep(const RateModel& model, const Landscape& landscape, double m);

/// Throws Error describing the violation, if any.
void require_valid_timestep(const RateModel& model, const Landscape& landscape, double m);

/// Reads `colonisation = ...`, `extinction = ...` and optional per-patch
/// overrides `patch.<i>.colonisation = ...` (1-based i) from key/value text.
RateModel read_rate_config(std::istream& in, std::size_t n);
RateModel load_rate_config(const std::string& path, std::size_t n);

}  // namespace metapop
