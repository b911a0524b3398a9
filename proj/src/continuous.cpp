#include "metapop/continuous.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "metapop/error.hpp"
#include "metapop/random.hpp"

namespace metapop {

namespace {

void check_sizes(std::size_t n, const Landscape& landscape, const RateModel& rates) {
  if (landscape.size() != n || rates.size() != n) throw Error("state, landscape and rate model sizes differ");
}

void check_occupancy(std::span<const std::uint8_t> x) {
  for (auto v : x) {
    if (v > 1) throw Error("occupancy entries must be 0 or 1");
  }
}

void vector_field(std::span<const double> p, const Landscape& landscape, const RateModel& rates,
                  std::vector<double>& s, std::span<double> out) {
  landscape.connectivity_into(p, s);
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] = rates.colonisation_rate(i, s[i]) * (1.0 - p[i]) - rates.extinction_rate(i, s[i]) * p[i];
  }
}

// Connectivity of a binary state under single-patch flips. Incremental
// updates are refreshed from scratch periodically and whenever the state
// empties, so an all-empty state always sees exactly zero connectivity.
class ConnectivityTracker {
 public:
  ConnectivityTracker(const Landscape& landscape, const Occupancy& x) : landscape_(&landscape), s_(x.size()) {
    occupied_ = static_cast<std::size_t>(std::count(x.begin(), x.end(), 1));
    landscape_->connectivity_into(std::span<const std::uint8_t>(x), s_);
  }

  double operator[](std::size_t i) const noexcept { return std::max(s_[i], 0.0); }

  void flip(const Occupancy& x_after, std::size_t j) {
    const double sign = x_after[j] ? 1.0 : -1.0;
    occupied_ = x_after[j] ? occupied_ + 1 : occupied_ - 1;
    if (occupied_ == 0 || ++updates_ >= refresh_interval()) {
      landscape_->connectivity_into(std::span<const std::uint8_t>(x_after), s_);
      updates_ = 0;
      return;
    }
    for (const auto& [i, c] : landscape_->influence_of(j)) s_[i] += sign * c;
  }

 private:
  std::size_t refresh_interval() const noexcept { return std::max<std::size_t>(s_.size(), 64); }

  const Landscape* landscape_;
  std::vector<double> s_;
  std::size_t occupied_ = 0;
  std::size_t updates_ = 0;
};

}  // namespace

std::vector<double> OdePath::at(double t) const {
  std::vector<double> out(values_.cols());
  at_into(t, out);
  return out;
}

void OdePath::at_into(double t, std::span<double> out) const {
  const std::size_t last = values_.rows() - 1;
  if (last == 0 || t <= 0.0) {
    std::copy(values_.row(0).begin(), values_.row(0).end(), out.begin());
    return;
  }
  const double pos = std::min(t / step_, static_cast<double>(last));
  const auto k = std::min(static_cast<std::size_t>(pos), last - 1);
  const double frac = pos - static_cast<double>(k);
  const auto lo = values_.row(k);
  const auto hi = values_.row(k + 1);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = lo[i] + frac * (hi[i] - lo[i]);
}

OdePath integrate_ode(std::span<const double> p0, const Landscape& landscape, const RateModel& rates, double horizon,
                      double step) {
  const std::size_t n = p0.size();
  check_sizes(n, landscape, rates);
  if (!(step > 0.0)) throw Error("ODE step h must be positive");
  if (!(horizon >= 0.0)) throw Error("ODE horizon must be non-negative");
  for (double v : p0) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error("ODE initial state must lie in [0, 1]");
  }
  const auto steps = static_cast<std::size_t>(std::max(0.0, std::ceil(horizon / step - 1e-9)));
  const double h = steps == 0 ? step : horizon / static_cast<double>(steps);
  PathMatrix<double> values(steps + 1, n);
  std::copy(p0.begin(), p0.end(), values.row(0).begin());

  std::vector<double> s(n), k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto p = values.row(t);
    vector_field(p, landscape, rates, s, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = p[i] + 0.5 * h * k1[i];
    vector_field(tmp, landscape, rates, s, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = p[i] + 0.5 * h * k2[i];
    vector_field(tmp, landscape, rates, s, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = p[i] + h * k3[i];
    vector_field(tmp, landscape, rates, s, k4);
    auto next = values.row(t + 1);
    for (std::size_t i = 0; i < n; ++i) {
      double v = p[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (v < 0.0 && v >= -1e-12) v = 0.0;
      if (v > 1.0 && v <= 1.0 + 1e-12) v = 1.0;
      if (!(v >= 0.0 && v <= 1.0)) {
        std::ostringstream msg;
        msg << "ODE step left [0, 1] at t = " << h * static_cast<double>(t + 1) << " (value " << v
            << "); reduce h";
        throw Error(msg.str());
      }
      next[i] = v;
    }
  }
  return OdePath(h, std::move(values));
}

double k_max_rate(const Landscape& landscape, const RateModel& rates) {
  check_sizes(landscape.size(), landscape, rates);
  const auto sup = rate_suprema(rates, landscape.max_connectivity());
  double k = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) k = std::max({k, sup.colonisation[i], sup.extinction[i]});
  return k;
}

double default_ode_step(const Landscape& landscape, const RateModel& rates) {
  const double k = k_max_rate(landscape, rates);
  return k > 0.0 ? std::min(0.01, 1.0 / (10.0 * k)) : 0.01;
}

Occupancy EventPath::state_at(double t) const {
  Occupancy x = initial;
  for (const auto& e : events) {
    if (e.time > t) break;
    x[e.patch] = e.value;
  }
  return x;
}

EventPath simulate_ctmc(std::span<const std::uint8_t> x0, const Landscape& landscape, const RateModel& rates,
                        double horizon, std::uint64_t seed) {
  const std::size_t n = x0.size();
  check_sizes(n, landscape, rates);
  check_occupancy(x0);
  EventPath path;
  path.initial.assign(x0.begin(), x0.end());
  path.horizon = horizon;
  Occupancy x = path.initial;
  ConnectivityTracker s(landscape, x);
  RandomStream rng(seed);
  std::vector<double> rate(n);
  double t = 0.0;
  while (true) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      rate[i] = x[i] ? rates.extinction_rate(i, s[i]) : rates.colonisation_rate(i, s[i]);
      total += rate[i];
    }
    if (!(total > 0.0)) {
      path.absorbed = true;
      path.absorption_time = t;
      break;
    }
    t += rng.exponential(total);
    if (t > horizon) break;
    double target = rng.uniform() * total;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (target < rate[i]) {
        chosen = i;
        break;
      }
      target -= rate[i];
    }
    // Guard against the rounding tail landing on a zero-rate patch.
    while (rate[chosen] <= 0.0 && chosen > 0) --chosen;
    x[chosen] ^= 1;
    s.flip(x, chosen);
    path.events.push_back({t, chosen, x[chosen]});
  }
  return path;
}

Occupancy CoupledCtTrajectory::w_at(double t) const {
  Occupancy w = initial;
  for (const auto& e : events) {
    if (e.time > t) break;
    w[e.patch] = e.w;
  }
  return w;
}

Occupancy CoupledCtTrajectory::x_at(double t) const {
  Occupancy x = initial;
  for (const auto& e : events) {
    if (e.time > t) break;
    x[e.patch] = e.x;
  }
  return x;
}

Occupancy CoupledCtTrajectory::j_at(double t) const {
  Occupancy j(initial.size(), 0);
  for (const auto& e : events) {
    if (e.time > t) break;
    if (e.w != e.x) j[e.patch] = 1;
  }
  return j;
}

double CoupledCtTrajectory::z_at(double t) const {
  double z = 0.0;
  for (const auto& e : events) {
    if (e.time > t) break;
    z = e.z;
  }
  return z;
}

std::size_t run_coupled_ct(std::span<const std::uint8_t> x0, const Landscape& landscape, const RateModel& rates,
                           double horizon, std::uint64_t seed, const OdePath& ode, std::span<const double> checkpoints,
                           const CoupledCtObserver& observer) {
  const std::size_t n = x0.size();
  check_sizes(n, landscape, rates);
  check_occupancy(x0);
  if (ode.values().cols() != n) throw Error("ODE path size does not match the landscape");
  if (ode.horizon() < horizon * (1.0 - 1e-12)) throw Error("ODE path is shorter than the simulation horizon");

  // S_i(p(t)) on the ODE grid; linear in p, so interpolating S equals S of the interpolated p.
  const std::size_t grid = ode.grid_points();
  PathMatrix<double> s_p(grid, n);
  for (std::size_t k = 0; k < grid; ++k) landscape.connectivity_into(ode.at_grid(k), s_p.row(k));
  auto connectivity_p = [&](std::size_t i, double t) {
    if (grid == 1) return s_p(0, i);
    const double pos = std::min(t / ode.step(), static_cast<double>(grid - 1));
    const auto k = std::min(static_cast<std::size_t>(pos), grid - 2);
    const double frac = pos - static_cast<double>(k);
    return s_p(k, i) + frac * (s_p(k + 1, i) - s_p(k, i));
  };

  const auto weights = landscape.weights();
  Occupancy x(x0.begin(), x0.end());
  Occupancy w = x;
  Occupancy j(n, 0);
  double z = 0.0;
  ConnectivityTracker s_x(landscape, x);
  RandomStream rng(seed);

  std::vector<double> marks(checkpoints.begin(), checkpoints.end());
  std::sort(marks.begin(), marks.end());
  std::size_t next_mark = 0;
  auto emit_marks_until = [&](double t) {
    while (next_mark < marks.size() && marks[next_mark] <= t) {
      if (marks[next_mark] >= 0.0) observer(marks[next_mark], CoupledCtState{w, x, j, z, CoupledCtState::no_event});
      ++next_mark;
    }
  };

  observer(0.0, CoupledCtState{w, x, j, z, CoupledCtState::no_event});
  const double k = k_max_rate(landscape, rates);
  const double patch_ceiling = 2.0 * k;
  const double dominating = static_cast<double>(n) * patch_ceiling;
  std::size_t candidates = 0;
  double t = 0.0;
  while (dominating > 0.0) {
    t += rng.exponential(dominating);
    if (t > horizon) break;
    ++candidates;
    const std::size_t i = rng.index(n);
    const double u = rng.uniform() * patch_ceiling;
    emit_marks_until(t);

    const double sp = std::max(connectivity_p(i, t), 0.0);
    const double cp = rates.colonisation_rate(i, sp);
    const double ep = rates.extinction_rate(i, sp);
    const double cx = rates.colonisation_rate(i, s_x[i]);
    const double ex = rates.extinction_rate(i, s_x[i]);

    // Rates of (both move, only W moves, only X moves) for coordinate i.
    double both = 0.0, w_only = 0.0, x_only = 0.0;
    if (w[i] == x[i]) {
      const double rp = w[i] ? ep : cp;
      const double rx = x[i] ? ex : cx;
      both = std::min(rp, rx);
      w_only = std::max(rp - rx, 0.0);
      x_only = std::max(rx - rp, 0.0);
    } else {
      w_only = w[i] ? ep : cp;
      x_only = x[i] ? ex : cx;
    }
    if (both + w_only + x_only > patch_ceiling * (1.0 + 1e-9)) {
      throw Error("thinning: patch rate exceeds the dominating rate 2 k(C, E)");
    }

    bool flip_w = false, flip_x = false;
    if (u < both) {
      flip_w = flip_x = true;
    } else if (u < both + w_only) {
      flip_w = true;
    } else if (u < both + w_only + x_only) {
      flip_x = true;
    } else {
      continue;
    }
    if (flip_w) w[i] ^= 1;
    if (flip_x) {
      x[i] ^= 1;
      s_x.flip(x, i);
    }
    if (!j[i] && w[i] != x[i]) {
      j[i] = 1;
      z += weights[i];
    }
    observer(t, CoupledCtState{w, x, j, z, i});
  }
  emit_marks_until(horizon);
  return candidates;
}

CoupledCtTrajectory simulate_coupled_ct(std::span<const std::uint8_t> x0, const Landscape& landscape,
                                        const RateModel& rates, double horizon, std::uint64_t seed,
                                        const OdePath& ode) {
  CoupledCtTrajectory out;
  out.initial.assign(x0.begin(), x0.end());
  out.horizon = horizon;
  out.candidates = run_coupled_ct(x0, landscape, rates, horizon, seed, ode, {}, [&](double t, const CoupledCtState& s) {
    if (s.patch == CoupledCtState::no_event) return;
    out.events.push_back({t, s.patch, s.w[s.patch], s.x[s.patch], s.z});
  });
  return out;
}

}  // namespace metapop
