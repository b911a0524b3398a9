#include "metapop/discrete.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>

#include "metapop/error.hpp"

namespace metapop {

namespace {

// Probability that the patch is occupied after the step, given its state and
// the rates felt at the current configuration.
inline double occupied_threshold(bool occupied, double colonisation, double extinction, double inv_m) noexcept {
  return occupied ? 1.0 - inv_m * extinction : inv_m * colonisation;
}

void deterministic_into(std::span<const double> p, std::span<const double> s_p, const RateModel& rates, double inv_m,
                        std::span<double> out) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double c = rates.colonisation_rate(i, s_p[i]);
    const double e = rates.extinction_rate(i, s_p[i]);
    double next = p[i] + inv_m * c * (1.0 - p[i]) - inv_m * e * p[i];
    // Rounding can push a convex combination a few ulps past the boundary.
    if (next < 0.0 && next > -1e-12) next = 0.0;
    if (next > 1.0 && next < 1.0 + 1e-12) next = 1.0;
    if (!(next >= 0.0 && next <= 1.0)) {
      throw Error("deterministic step left [0, 1]; the timestep precondition is violated");
    }
    out[i] = next;
  }
}

void check_sizes(std::size_t n, const Landscape& landscape, const RateModel& rates) {
  if (landscape.size() != n || rates.size() != n) throw Error("state, landscape and rate model sizes differ");
}

}  // namespace

std::size_t step_count(double m, double horizon) {
  if (!(m > 0.0) || !(horizon >= 0.0)) throw Error("need m > 0 and T >= 0");
  const double steps = m * horizon;
  const double rounded = std::round(steps);
  if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps)) {
    std::ostringstream msg;
    msg << "m*T = " << steps << " is not an integer";
    throw Error(msg.str());
  }
  return static_cast<std::size_t>(rounded);
}

ProbabilityVector step_deterministic(std::span<const double> p, const Landscape& landscape, const RateModel& rates,
                                     double m) {
  check_sizes(p.size(), landscape, rates);
  std::vector<double> s(p.size());
  landscape.connectivity_into(p, s);
  ProbabilityVector out(p.size());
  deterministic_into(p, s, rates, 1.0 / m, out);
  return out;
}

PathMatrix<double> deterministic_path(std::span<const double> p0, const Landscape& landscape, const RateModel& rates,
                                      double m, std::size_t steps) {
  check_sizes(p0.size(), landscape, rates);
  require_valid_timestep(rates, landscape, m);
  const std::size_t n = p0.size();
  PathMatrix<double> path(steps + 1, n);
  std::copy(p0.begin(), p0.end(), path.row(0).begin());
  std::vector<double> s(n);
  for (std::size_t t = 0; t < steps; ++t) {
    landscape.connectivity_into(path.row(t), s);
    deterministic_into(path.row(t), s, rates, 1.0 / m, path.row(t + 1));
  }
  return path;
}

CoupledState step_coupled(std::span<const std::uint8_t> x, std::span<const std::uint8_t> w, std::span<const double> p,
                          std::span<const double> uniforms, const Landscape& landscape, const RateModel& rates,
                          double m) {
  const std::size_t n = x.size();
  check_sizes(n, landscape, rates);
  if (w.size() != n || p.size() != n || uniforms.size() != n) throw Error("step_coupled: length mismatch");
  const double inv_m = 1.0 / m;
  std::vector<double> s_x(n), s_p(n);
  landscape.connectivity_into(x, s_x);
  landscape.connectivity_into(p, s_p);
  CoupledState next{Occupancy(n), Occupancy(n), ProbabilityVector(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double tx = occupied_threshold(x[i], rates.colonisation_rate(i, s_x[i]), rates.extinction_rate(i, s_x[i]), inv_m);
    const double tw = occupied_threshold(w[i], rates.colonisation_rate(i, s_p[i]), rates.extinction_rate(i, s_p[i]), inv_m);
    next.x[i] = uniforms[i] <= tx;
    next.w[i] = uniforms[i] <= tw;
  }
  deterministic_into(p, s_p, rates, inv_m, next.p);
  return next;
}

std::vector<double> CoupledTrajectory::weighted_disagreement(std::span<const double> weights) const {
  std::vector<double> out(j.rows(), 0.0);
  for (std::size_t t = 0; t < j.rows(); ++t) {
    const auto row = j.row(t);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i]) out[t] += weights[i];
    }
  }
  return out;
}

CoupledChain::CoupledChain(const Landscape& landscape, const RateModel& rates, double m,
                           std::span<const std::uint8_t> x0)
    : landscape_(&landscape), rates_(&rates), m_(m) {
  const std::size_t n = x0.size();
  check_sizes(n, landscape, rates);
  require_valid_timestep(rates, landscape, m);
  x_.assign(x0.begin(), x0.end());
  for (auto v : x_) {
    if (v > 1) throw Error("initial occupancy entries must be 0 or 1");
  }
  w_ = x_;
  j_.assign(n, 0);
  p_.assign(x_.begin(), x_.end());
  uniforms_.resize(n);
  s_x_.resize(n);
  s_p_.resize(n);
  scratch_p_.resize(n);
  scratch_x_.resize(n);
  scratch_w_.resize(n);
}

void CoupledChain::advance(RandomStream& rng) {
  const std::size_t n = x_.size();
  const double inv_m = 1.0 / m_;
  for (auto& u : uniforms_) u = rng.uniform();
  landscape_->connectivity_into(std::span<const std::uint8_t>(x_), s_x_);
  landscape_->connectivity_into(std::span<const double>(p_), s_p_);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = *rates_;
    const double tx = occupied_threshold(x_[i], r.colonisation_rate(i, s_x_[i]), r.extinction_rate(i, s_x_[i]), inv_m);
    const double tw = occupied_threshold(w_[i], r.colonisation_rate(i, s_p_[i]), r.extinction_rate(i, s_p_[i]), inv_m);
    scratch_x_[i] = uniforms_[i] <= tx;
    scratch_w_[i] = uniforms_[i] <= tw;
  }
  deterministic_into(p_, s_p_, *rates_, inv_m, scratch_p_);
  x_.swap(scratch_x_);
  w_.swap(scratch_w_);
  p_.swap(scratch_p_);
  for (std::size_t i = 0; i < n; ++i) j_[i] = j_[i] | static_cast<std::uint8_t>(x_[i] != w_[i]);
  ++time_;
}

CoupledTrajectory simulate_coupled(std::span<const std::uint8_t> x0, const Landscape& landscape, const RateModel& rates,
                                   double m, double horizon, std::uint64_t seed) {
  const std::size_t steps = step_count(m, horizon);
  CoupledChain chain(landscape, rates, m, x0);
  RandomStream rng(seed);
  const std::size_t n = x0.size();
  CoupledTrajectory out{seed, m, PathMatrix<std::uint8_t>(steps + 1, n), PathMatrix<std::uint8_t>(steps + 1, n),
                        PathMatrix<double>(steps + 1, n), PathMatrix<std::uint8_t>(steps + 1, n)};
  auto record = [&](std::size_t t) {
    std::copy(chain.x().begin(), chain.x().end(), out.x.row(t).begin());
    std::copy(chain.w().begin(), chain.w().end(), out.w.row(t).begin());
    std::copy(chain.p().begin(), chain.p().end(), out.p.row(t).begin());
    std::copy(chain.j().begin(), chain.j().end(), out.j.row(t).begin());
  };
  record(0);
  for (std::size_t t = 1; t <= steps; ++t) {
    chain.advance(rng);
    record(t);
  }
  return out;
}

PathMatrix<std::uint8_t> simulate_ifm(std::span<const std::uint8_t> x0, const Landscape& landscape,
                                      const RateModel& rates, double m, double horizon, std::uint64_t seed) {
  const std::size_t steps = step_count(m, horizon);
  const std::size_t n = x0.size();
  check_sizes(n, landscape, rates);
  require_valid_timestep(rates, landscape, m);
  const double inv_m = 1.0 / m;
  PathMatrix<std::uint8_t> path(steps + 1, n);
  std::copy(x0.begin(), x0.end(), path.row(0).begin());
  RandomStream rng(seed);
  std::vector<double> s(n);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto cur = path.row(t);
    auto next = path.row(t + 1);
    landscape.connectivity_into(std::span<const std::uint8_t>(cur), s);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = rng.uniform();
      next[i] = u <= occupied_threshold(cur[i], rates.colonisation_rate(i, s[i]), rates.extinction_rate(i, s[i]), inv_m);
    }
  }
  return path;
}

}  // namespace metapop
