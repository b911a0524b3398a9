#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "metapop/discrete.hpp"
#include "metapop/landscape.hpp"
#include "metapop/rates.hpp"

namespace metapop {

/// Solution of dp_i/dt = C_i(p)(1 - p_i) - E_i(p) p_i on a uniform grid.
class OdePath {
 public:
  OdePath(double step, PathMatrix<double> values) : step_(step), values_(std::move(values)) {}

  double step() const noexcept { return step_; }
  double horizon() const noexcept { return step_ * static_cast<double>(values_.rows() - 1); }
  std::size_t grid_points() const noexcept { return values_.rows(); }
  double time(std::size_t k) const noexcept { return step_ * static_cast<double>(k); }
  std::span<const double> at_grid(std::size_t k) const noexcept { return values_.row(k); }
  const PathMatrix<double>& values() const noexcept { return values_; }

  /// Linear interpolation between grid points; t is clamped to [0, horizon].
  std::vector<double> at(double t) const;
  void at_into(double t, std::span<double> out) const;

 private:
  double step_;
  PathMatrix<double> values_;
};

/// Classical fixed-step RK4. The grid has ceil(T/h) uniform steps ending at T.
/// Throws if a step leaves [0, 1] by more than 1e-12.
OdePath integrate_ode(std::span<const double> p0, const Landscape& landscape, const RateModel& rates, double horizon,
                      double step);

/// Default step min(0.01, 1 / (10 k(C, E))).
double default_ode_step(const Landscape& landscape, const RateModel& rates);

struct OccupancyEvent {
  double time;
  std::size_t patch;
  std::uint8_t value;
};

/// Jump path of the continuous-time chain; states are stored as deltas.
struct EventPath {
  Occupancy initial;
  double horizon = 0.0;
  std::vector<OccupancyEvent> events;
  /// True when the total rate hit zero before the horizon.
  bool absorbed = false;
  double absorption_time = 0.0;

  /// State just after all events with time <= t.
  Occupancy state_at(double t) const;
  Occupancy final_state() const { return state_at(horizon); }
};

/// max_i max{sup C_i, sup E_i} over the reachable connectivity range.
double k_max_rate(const Landscape& landscape, const RateModel& rates);

/// Exact competing-exponentials simulation up to the horizon.
EventPath simulate_ctmc(std::span<const std::uint8_t> x0, const Landscape& landscape, const RateModel& rates,
                        double horizon, std::uint64_t seed);

struct CoupledCtEvent {
  double time;
  std::size_t patch;
  std::uint8_t w;
  std::uint8_t x;
  /// Weighted disagreement Z = sum_i a_i J_i just after the event.
  double z;
};

/// Joint path of W (independent patches driven by p(t)) and X.
struct CoupledCtTrajectory {
  Occupancy initial;
  double horizon = 0.0;
  std::vector<CoupledCtEvent> events;
  std::size_t candidates = 0;

  Occupancy w_at(double t) const;
  Occupancy x_at(double t) const;
  /// J(t): patches whose W and X coordinates have disagreed at some time <= t.
  Occupancy j_at(double t) const;
  double z_at(double t) const;
};

/// Live view handed to observers.
struct CoupledCtState {
  const Occupancy& w;
  const Occupancy& x;
  const Occupancy& j;
  double z;
  /// Patch that just jumped, or `no_event` at t = 0 and at checkpoints.
  std::size_t patch;
  static constexpr std::size_t no_event = static_cast<std::size_t>(-1);
};

/// Called at t = 0, at each requested checkpoint and after each event.
using CoupledCtObserver = std::function<void(double time, const CoupledCtState& state)>;

/// Exact simulation of the bivariate chain by thinning against the constant
/// rate 2 n k(C, E); p(t) is taken from the ODE path by linear interpolation.
CoupledCtTrajectory simulate_coupled_ct(std::span<const std::uint8_t> x0, const Landscape& landscape,
                                        const RateModel& rates, double horizon, std::uint64_t seed,
                                        const OdePath& ode);

/// Observer form; records nothing itself. Returns the number of thinning candidates.
std::size_t run_coupled_ct(std::span<const std::uint8_t> x0, const Landscape& landscape, const RateModel& rates,
                           double horizon, std::uint64_t seed, const OdePath& ode, std::span<const double> checkpoints,
                           const CoupledCtObserver& observer);

}  // namespace metapop
