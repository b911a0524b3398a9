#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "metapop/discrete.hpp"
#include "metapop/landscape.hpp"
#include "metapop/rates.hpp"

namespace metapop {

/// Probability vector over {0,1}^bits, states indexed little-endian
/// (bit i of the index is coordinate i).
struct ExactDistribution {
  std::size_t bits = 0;
  std::vector<double> probability;

  std::size_t states() const noexcept { return probability.size(); }
  double total() const noexcept;
  Occupancy state(std::size_t index) const;
  static std::size_t index_of(std::span<const std::uint8_t> state);
};

inline constexpr std::size_t max_exact_patches = 6;
inline constexpr std::size_t max_joint_patches = 3;

/// Row-major 2^n x 2^n one-step transition matrix of the discrete chain.
std::vector<double> transition_matrix(const Landscape& landscape, const RateModel& rates, double m);

/// Law of X_{mT} by powering the product-form transition matrix. n <= 6.
ExactDistribution exact_chain_distribution(std::span<const std::uint8_t> x0, const Landscape& landscape,
                                           const RateModel& rates, double m, double horizon);

struct CoupledMoments {
  /// Joint law of (X, W, J) at time mT: bits 0..n-1 hold X, n..2n-1 W, 2n..3n-1 J.
  ExactDistribution joint;
  std::vector<double> mean_j;  // E[J_i]
  double mean_z = 0.0;         // E[sum_i a_i J_i]
  double var_z = 0.0;
};

/// Exact coupled chain. Each patch's pair (X', W') is read off the two
/// thresholds of the shared uniform. n <= 3.
CoupledMoments exact_coupled_moment(std::span<const std::uint8_t> x0, const Landscape& landscape,
                                    const RateModel& rates, double m, double horizon);

/// Row-major generator of the continuous-time chain on {0,1}^n.
std::vector<double> generator_matrix(const Landscape& landscape, const RateModel& rates);

/// Law of X(T) by uniformization at rate 1.05 x the largest exit rate,
/// truncating the Poisson series at tail mass 1e-12. n <= 6.
ExactDistribution exact_ctmc_marginal(std::span<const std::uint8_t> x0, const Landscape& landscape,
                                      const RateModel& rates, double horizon);

/// Same law via a dense matrix exponential (scaling and squaring).
ExactDistribution ctmc_marginal_expm(std::span<const std::uint8_t> x0, const Landscape& landscape,
                                     const RateModel& rates, double horizon);

/// E[Z(T)] and Var[Z(T)] for the continuous-time coupled chain, integrating the
/// forward equation of (X, W, J) together with the ODE for p by RK4. n <= 3.
CoupledMoments exact_coupled_ct_moment(std::span<const std::uint8_t> x0, const Landscape& landscape,
                                       const RateModel& rates, double horizon, double step);

}  // namespace metapop
