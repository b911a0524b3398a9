#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "metapop/landscape.hpp"
#include "metapop/random.hpp"
#include "metapop/rates.hpp"

namespace metapop {

/// Binary patch occupancy, one byte per patch.
using Occupancy = std::vector<std::uint8_t>;
/// Occupancy probabilities in [0, 1].
using ProbabilityVector = std::vector<double>;

/// Dense row-major time x patch storage for recorded paths.
template <typename T>
class PathMatrix {
 public:
  PathMatrix() = default;
  PathMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<T> row(std::size_t t) noexcept { return {data_.data() + t * cols_, cols_}; }
  std::span<const T> row(std::size_t t) const noexcept { return {data_.data() + t * cols_, cols_}; }
  T operator()(std::size_t t, std::size_t i) const noexcept { return data_[t * cols_ + i]; }
  const std::vector<T>& data() const noexcept { return data_; }
  bool operator==(const PathMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Number of steps m*T; throws when m*T is not an integer.
std::size_t step_count(double m, double horizon);

/// One step of p' = p + m^{-1} C(p)(1 - p) - m^{-1} E(p) p.
ProbabilityVector step_deterministic(std::span<const double> p, const Landscape& landscape, const RateModel& rates,
                                     double m);

/// Deterministic recursion for `steps` steps; row t holds p_t.
PathMatrix<double> deterministic_path(std::span<const double> p0, const Landscape& landscape, const RateModel& rates,
                                      double m, std::size_t steps);

struct CoupledState {
  Occupancy x;
  Occupancy w;
  ProbabilityVector p;
};

/// Advances the chain X, the independent-patches chain W and p with one
/// shared uniform per patch: a patch switches on when empty and U_i is below
/// its colonisation threshold, and stays on when occupied and U_i is below
/// its survival threshold. X uses rates at X, W uses rates at p.
CoupledState step_coupled(std::span<const std::uint8_t> x, std::span<const std::uint8_t> w, std::span<const double> p,
                          std::span<const double> uniforms, const Landscape& landscape, const RateModel& rates,
                          double m);

/// Synchronised (X, W, p, J) paths for t = 0..mT.
struct CoupledTrajectory {
  std::uint64_t seed = 0;
  double m = 1.0;
  PathMatrix<std::uint8_t> x;
  PathMatrix<std::uint8_t> w;
  PathMatrix<double> p;
  PathMatrix<std::uint8_t> j;

  std::size_t steps() const noexcept { return x.rows() == 0 ? 0 : x.rows() - 1; }
  /// sum_i a_i J_{i,t} for each t.
  std::vector<double> weighted_disagreement(std::span<const double> weights) const;
};

/// Incremental coupled simulator. Uniforms are drawn one per patch per step,
/// patches in index order, from a single stream.
class CoupledChain {
 public:
  CoupledChain(const Landscape& landscape, const RateModel& rates, double m, std::span<const std::uint8_t> x0);

  void advance(RandomStream& rng);

  std::size_t time() const noexcept { return time_; }
  const Occupancy& x() const noexcept { return x_; }
  const Occupancy& w() const noexcept { return w_; }
  const ProbabilityVector& p() const noexcept { return p_; }
  const Occupancy& j() const noexcept { return j_; }

 private:
  const Landscape* landscape_;
  const RateModel* rates_;
  double m_;
  std::size_t time_ = 0;
  Occupancy x_, w_, j_;
  ProbabilityVector p_;
  std::vector<double> uniforms_, s_x_, s_p_, scratch_p_;
  Occupancy scratch_x_, scratch_w_;
};

/// Runs the coupled construction for mT steps from W_0 = X_0, p_0 = X_0.
CoupledTrajectory simulate_coupled(std::span<const std::uint8_t> x0, const Landscape& landscape, const RateModel& rates,
                                   double m, double horizon, std::uint64_t seed);

/// The X-marginal alone, consuming the uniform stream exactly as simulate_coupled.
PathMatrix<std::uint8_t> simulate_ifm(std::span<const std::uint8_t> x0, const Landscape& landscape,
                                      const RateModel& rates, double m, double horizon, std::uint64_t seed);

}  // namespace metapop
