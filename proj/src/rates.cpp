#include "metapop/rates.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "metapop/config.hpp"
#include "metapop/error.hpp"
#include "metapop/landscape.hpp"

namespace metapop {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double hill(double s, double y) noexcept {
  const double s2 = s * s;
  return s2 / (s2 + y * y);
}

// Derivative 2 s y^2 / (s^2 + y^2)^2 rises on [0, y/sqrt(3)] and falls after.
double hill_lipschitz(double s_max, double y) noexcept {
  const double s = std::min(std::max(s_max, 0.0), y / std::sqrt(3.0));
  const double denom = s * s + y * y;
  return 2.0 * s * y * y / (denom * denom);
}

void check_parameters(const RateFunction& f) {
  std::visit(overloaded{
                 [](const LinearRate& r) {
                   if (!(r.lambda >= 0.0)) throw Error("linear rate requires lambda >= 0");
                 },
                 [](const ConstantRate& r) {
                   if (!(r.value >= 0.0)) throw Error("constant rate requires c >= 0");
                 },
                 [](const HillRate& r) {
                   if (!(r.half_saturation > 0.0)) throw Error("hill rate requires y > 0");
                 },
                 [](const RescueRate& r) {
                   if (!(r.e >= 0.0) || !(r.half_saturation > 0.0)) throw Error("rescue rate requires e >= 0, y > 0");
                 },
             },
             f);
}

}  // namespace

double evaluate(const RateFunction& f, double s) noexcept {
  return std::visit(overloaded{
                        [s](const LinearRate& r) { return r.lambda * s; },
                        [](const ConstantRate& r) { return r.value; },
                        [s](const HillRate& r) { return hill(s, r.half_saturation); },
                        [s](const RescueRate& r) { return r.e * (1.0 - hill(s, r.half_saturation)); },
                    },
                    f);
}

double supremum(const RateFunction& f, double s_max) noexcept {
  return std::visit(overloaded{
                        [s_max](const LinearRate& r) { return r.lambda * s_max; },
                        [](const ConstantRate& r) { return r.value; },
                        [s_max](const HillRate& r) { return hill(s_max, r.half_saturation); },
                        [](const RescueRate& r) { return r.e; },
                    },
                    f);
}

double lipschitz(const RateFunction& f, double s_max) noexcept {
  return std::visit(overloaded{
                        [](const LinearRate& r) { return r.lambda; },
                        [](const ConstantRate&) { return 0.0; },
                        [s_max](const HillRate& r) { return hill_lipschitz(s_max, r.half_saturation); },
                        [s_max](const RescueRate& r) { return r.e * hill_lipschitz(s_max, r.half_saturation); },
                    },
                    f);
}

RateFunction parse_rate(const std::string& text) {
  const auto open = text.find('(');
  const auto close = text.rfind(')');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw Error("rate function must look like name(args): " + text);
  }
  std::string name = text.substr(0, open);
  name.erase(std::remove_if(name.begin(), name.end(), ::isspace), name.end());
  std::string args = text.substr(open + 1, close - open - 1);
  std::replace(args.begin(), args.end(), ',', ' ');
  std::istringstream in(args);
  std::vector<double> values;
  double v = 0;
  while (in >> v) values.push_back(v);
  if (!in.eof()) throw Error("bad rate arguments: " + text);
  auto expect = [&](std::size_t count) {
    if (values.size() != count) throw Error(name + " takes " + std::to_string(count) + " argument(s): " + text);
  };
  RateFunction f;
  if (name == "linear") {
    expect(1);
    f = LinearRate{values[0]};
  } else if (name == "const" || name == "constant") {
    expect(1);
    f = ConstantRate{values[0]};
  } else if (name == "hill") {
    expect(1);
    f = HillRate{values[0]};
  } else if (name == "rescue") {
    expect(2);
    f = RescueRate{values[0], values[1]};
  } else {
    throw Error("unknown rate family: " + name);
  }
  check_parameters(f);
  return f;
}

std::string to_string(const RateFunction& f) {
  std::ostringstream out;
  out.precision(17);
  std::visit(overloaded{
                 [&](const LinearRate& r) { out << "linear(" << r.lambda << ")"; },
                 [&](const ConstantRate& r) { out << "const(" << r.value << ")"; },
                 [&](const HillRate& r) { out << "hill(" << r.half_saturation << ")"; },
                 [&](const RescueRate& r) { out << "rescue(" << r.e << ", " << r.half_saturation << ")"; },
             },
             f);
  return out.str();
}

RateModel::RateModel(std::vector<RateFunction> colonisation, std::vector<RateFunction> extinction)
    : colonisation_(std::move(colonisation)), extinction_(std::move(extinction)) {
  if (colonisation_.size() != extinction_.size()) throw Error("rate model: per-patch lists differ in length");
  if (colonisation_.empty()) throw Error("rate model: needs at least one patch");
  for (const auto& f : colonisation_) check_parameters(f);
  for (const auto& f : extinction_) check_parameters(f);
}

RateModel RateModel::uniform(std::size_t n, RateFunction colonisation, RateFunction extinction) {
  return RateModel(std::vector<RateFunction>(n, colonisation), std::vector<RateFunction>(n, extinction));
}

Rates eval_rates(const RateModel& model, std::span<const double> connectivity) {
  if (connectivity.size() != model.size()) throw Error("eval_rates: connectivity length mismatch");
  Rates out;
  out.colonisation.resize(model.size());
  out.extinction.resize(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double s = connectivity[i];
    if (!(s >= 0.0)) throw Error("eval_rates: connectivity must be non-negative");
    out.colonisation[i] = model.colonisation_rate(i, s);
    out.extinction[i] = model.extinction_rate(i, s);
  }
  return out;
}

LipschitzConstants lipschitz_constants(const RateModel& model, std::span<const double> s_max) {
  if (s_max.size() != model.size()) throw Error("lipschitz_constants: length mismatch");
  LipschitzConstants out;
  const std::size_t n = model.size();
  out.colonisation.resize(n);
  out.extinction.resize(n);
  out.total.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.colonisation[i] = lipschitz(model.colonisation(i), s_max[i]);
    out.extinction[i] = lipschitz(model.extinction(i), s_max[i]);
    out.total[i] = out.colonisation[i] + out.extinction[i];
  }
  return out;
}

Rates rate_suprema(const RateModel& model, std::span<const double> s_max) {
  if (s_max.size() != model.size()) throw Error("rate_suprema: length mismatch");
  Rates out;
  out.colonisation.resize(model.size());
  out.extinction.resize(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    out.colonisation[i] = supremum(model.colonisation(i), s_max[i]);
    out.extinction[i] = supremum(model.extinction(i), s_max[i]);
  }
  return out;
}

std::optional<TimestepViolation> validate_timestep(const RateModel& model, const Landscape& landscape, double m) {
  if (!(m > 0.0)) throw Error("timestep parameter m must be positive");
  if (model.size() != landscape.size()) throw Error("rate model and landscape sizes differ");
  const auto sup = rate_suprema(model, landscape.max_connectivity());
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double worst = std::max(sup.colonisation[i], sup.extinction[i]);
    if (worst / m > 1.0) return TimestepViolation{i, worst};
  }
  return std::nullopt;
}

void require_valid_timestep(const RateModel& model, const Landscape& landscape, double m) {
  if (const auto bad = validate_timestep(model, landscape, m)) {
    std::ostringstream msg;
    msg << "timestep m = " << m << " too small: patch " << bad->patch << " reaches rate " << bad->supremum
        << " so m^{-1} * rate exceeds 1";
    throw Error(msg.str());
  }
}

RateModel read_rate_config(std::istream& in, std::size_t n) {
  const auto kv = KeyValues::parse(in);
  std::vector<RateFunction> col(n, parse_rate(kv.get("colonisation")));
  std::vector<RateFunction> ext(n, parse_rate(kv.get("extinction")));
  for (const auto& [key, value] : kv.entries()) {
    if (key.rfind("patch.", 0) != 0) {
      if (key != "colonisation" && key != "extinction") throw Error("unknown rate config key: " + key);
      continue;
    }
    const auto dot = key.find('.', 6);
    if (dot == std::string::npos) throw Error("bad per-patch key: " + key);
    const std::size_t index = std::stoul(key.substr(6, dot - 6));
    if (index < 1 || index > n) throw Error("per-patch override out of range: " + key);
    const std::string field = key.substr(dot + 1);
    if (field == "colonisation") {
      col[index - 1] = parse_rate(value);
    } else if (field == "extinction") {
      ext[index - 1] = parse_rate(value);
    } else {
      throw Error("bad per-patch key: " + key);
    }
  }
  return RateModel(std::move(col), std::move(ext));
}

RateModel load_rate_config(const std::string& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open rate config " + path);
  return read_rate_config(in, n);
}

}  // namespace metapop
