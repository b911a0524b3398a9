#include "metapop/oracle.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>

#include "metapop/error.hpp"

namespace metapop {

namespace {

void check_inputs(std::span<const std::uint8_t> x0, const Landscape& landscape, const RateModel& rates,
                  std::size_t limit) {
  const std::size_t n = x0.size();
  if (landscape.size() != n || rates.size() != n) throw Error("state, landscape and rate model sizes differ");
  if (n == 0) throw Error("exact computations need at least one patch");
  if (n > limit) throw Error("exact computation limited to n <= " + std::to_string(limit));
  for (auto v : x0) {
    if (v > 1) throw Error("initial occupancy entries must be 0 or 1");
  }
}

Occupancy bits_of(std::size_t index, std::size_t n, std::size_t offset = 0) {
  Occupancy out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::uint8_t>((index >> (offset + i)) & 1U);
  return out;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Per-patch law of (X', W') under a shared uniform with thresholds tx, tw.
struct PairLaw {
  double p11, p10, p01, p00;  // (X', W')
};

PairLaw pair_law(double tx, double tw) {
  tx = clamp01(tx);
  tw = clamp01(tw);
  const double lo = std::min(tx, tw), hi = std::max(tx, tw);
  return {lo, std::max(tx - tw, 0.0), std::max(tw - tx, 0.0), 1.0 - hi};
}

// Rates (both move, only W moves, only X moves) of the continuous coupling at one patch.
struct MoveRates {
  double both, w_only, x_only;
};

MoveRates move_rates(bool w, bool x, double cp, double ep, double cx, double ex) {
  if (w == x) {
    const double rp = w ? ep : cp;
    const double rx = x ? ex : cx;
    return {std::min(rp, rx), std::max(rp - rx, 0.0), std::max(rx - rp, 0.0)};
  }
  return {0.0, w ? ep : cp, x ? ex : cx};
}

CoupledMoments moments_from_joint(ExactDistribution joint, std::size_t n, std::span<const double> weights) {
  CoupledMoments out;
  out.mean_j.assign(n, 0.0);
  double second = 0.0;
  for (std::size_t s = 0; s < joint.states(); ++s) {
    const double mass = joint.probability[s];
    if (mass == 0.0) continue;
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if ((s >> (2 * n + i)) & 1U) {
        out.mean_j[i] += mass;
        z += weights[i];
      }
    }
    out.mean_z += mass * z;
    second += mass * z * z;
  }
  out.var_z = std::max(second - out.mean_z * out.mean_z, 0.0);
  out.joint = std::move(joint);
  return out;
}

}  // namespace

double ExactDistribution::total() const noexcept {
  double sum = 0.0;
  for (double v : probability) sum += v;
  return sum;
}

Occupancy ExactDistribution::state(std::size_t index) const { return bits_of(index, bits); }

std::size_t ExactDistribution::index_of(std::span<const std::uint8_t> state) {
  std::size_t index = 0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i]) index |= std::size_t{1} << i;
  }
  return index;
}

std::vector<double> transition_matrix(const Landscape& landscape, const RateModel& rates, double m) {
  const std::size_t n = landscape.size();
  if (rates.size() != n) throw Error("rate model and landscape sizes differ");
  if (n == 0 || n > max_exact_patches) throw Error("transition matrix limited to 1 <= n <= 6");
  require_valid_timestep(rates, landscape, m);
  const std::size_t states = std::size_t{1} << n;
  std::vector<double> P(states * states, 0.0);
  std::vector<double> on(n);
  for (std::size_t from = 0; from < states; ++from) {
    const Occupancy x = bits_of(from, n);
    const auto s = landscape.connectivity(std::span<const std::uint8_t>(x));
    for (std::size_t i = 0; i < n; ++i) {
      on[i] = clamp01(x[i] ? 1.0 - rates.extinction_rate(i, s[i]) / m : rates.colonisation_rate(i, s[i]) / m);
    }
    for (std::size_t to = 0; to < states; ++to) {
      double prob = 1.0;
      for (std::size_t i = 0; i < n; ++i) prob *= ((to >> i) & 1U) ? on[i] : 1.0 - on[i];
      P[from * states + to] = prob;
    }
  }
  return P;
}

ExactDistribution exact_chain_distribution(std::span<const std::uint8_t> x0, const Landscape& landscape,
                                           const RateModel& rates, double m, double horizon) {
  check_inputs(x0, landscape, rates, max_exact_patches);
  const std::size_t steps = step_count(m, horizon);
  const std::size_t n = x0.size();
  const std::size_t states = std::size_t{1} << n;
  const auto P = transition_matrix(landscape, rates, m);
  std::vector<double> v(states, 0.0), next(states);
  v[ExactDistribution::index_of(x0)] = 1.0;
  for (std::size_t t = 0; t < steps; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t a = 0; a < states; ++a) {
      if (v[a] == 0.0) continue;
      for (std::size_t b = 0; b < states; ++b) next[b] += v[a] * P[a * states + b];
    }
    v.swap(next);
  }
  return {n, std::move(v)};
}

CoupledMoments exact_coupled_moment(std::span<const std::uint8_t> x0, const Landscape& landscape,
                                    const RateModel& rates, double m, double horizon) {
  check_inputs(x0, landscape, rates, max_joint_patches);
  const std::size_t steps = step_count(m, horizon);
  const std::size_t n = x0.size();
  const std::vector<double> p0(x0.begin(), x0.end());
  const auto p_path = deterministic_path(p0, landscape, rates, m, steps);

  const std::size_t states = std::size_t{1} << (3 * n);
  std::vector<double> v(states, 0.0), next(states);
  // W_0 = X_0, J_0 = 0.
  v[ExactDistribution::index_of(x0) | (ExactDistribution::index_of(x0) << n)] = 1.0;

  std::vector<PairLaw> laws(n);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto s_p = landscape.connectivity(p_path.row(t));
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s < states; ++s) {
      if (v[s] == 0.0) continue;
      const Occupancy x = bits_of(s, n, 0);
      const Occupancy w = bits_of(s, n, n);
      const std::size_t j = (s >> (2 * n)) & ((std::size_t{1} << n) - 1);
      const auto s_x = landscape.connectivity(std::span<const std::uint8_t>(x));
      for (std::size_t i = 0; i < n; ++i) {
        const double tx = x[i] ? 1.0 - rates.extinction_rate(i, s_x[i]) / m : rates.colonisation_rate(i, s_x[i]) / m;
        const double tw = w[i] ? 1.0 - rates.extinction_rate(i, s_p[i]) / m : rates.colonisation_rate(i, s_p[i]) / m;
        laws[i] = pair_law(tx, tw);
      }
      // Enumerate the 4^n joint outcomes; digit k of `combo` picks patch k's outcome.
      const std::size_t combos = std::size_t{1} << (2 * n);
      for (std::size_t combo = 0; combo < combos; ++combo) {
        double prob = v[s];
        std::size_t nx = 0, nw = 0, nj = j;
        for (std::size_t i = 0; i < n && prob > 0.0; ++i) {
          const unsigned outcome = (combo >> (2 * i)) & 3U;
          const bool xi = outcome & 1U;
          const bool wi = outcome & 2U;
          const PairLaw& law = laws[i];
          prob *= xi ? (wi ? law.p11 : law.p10) : (wi ? law.p01 : law.p00);
          if (xi) nx |= std::size_t{1} << i;
          if (wi) nw |= std::size_t{1} << i;
          if (xi != wi) nj |= std::size_t{1} << i;
        }
        if (prob > 0.0) next[nx | (nw << n) | (nj << (2 * n))] += prob;
      }
    }
    v.swap(next);
  }
  return moments_from_joint({3 * n, std::move(v)}, n, landscape.weights());
}

std::vector<double> generator_matrix(const Landscape& landscape, const RateModel& rates) {
  const std::size_t n = landscape.size();
  if (rates.size() != n) throw Error("rate model and landscape sizes differ");
  if (n == 0 || n > max_exact_patches) throw Error("generator limited to 1 <= n <= 6");
  const std::size_t states = std::size_t{1} << n;
  std::vector<double> Q(states * states, 0.0);
  for (std::size_t from = 0; from < states; ++from) {
    const Occupancy x = bits_of(from, n);
    const auto s = landscape.connectivity(std::span<const std::uint8_t>(x));
    double exit = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = x[i] ? rates.extinction_rate(i, s[i]) : rates.colonisation_rate(i, s[i]);
      Q[from * states + (from ^ (std::size_t{1} << i))] += r;
      exit += r;
    }
    Q[from * states + from] = -exit;
  }
  return Q;
}

ExactDistribution exact_ctmc_marginal(std::span<const std::uint8_t> x0, const Landscape& landscape,
                                      const RateModel& rates, double horizon) {
  check_inputs(x0, landscape, rates, max_exact_patches);
  if (!(horizon >= 0.0)) throw Error("horizon must be non-negative");
  const std::size_t n = x0.size();
  const std::size_t states = std::size_t{1} << n;
  const auto Q = generator_matrix(landscape, rates);
  std::vector<double> v(states, 0.0);
  v[ExactDistribution::index_of(x0)] = 1.0;

  double max_exit = 0.0;
  for (std::size_t s = 0; s < states; ++s) max_exit = std::max(max_exit, -Q[s * states + s]);
  if (max_exit == 0.0 || horizon == 0.0) return {n, std::move(v)};

  const double lambda = 1.05 * max_exit;
  const double mean = lambda * horizon;
  // P = I + Q / lambda
  std::vector<double> P(Q);
  for (double& q : P) q /= lambda;
  for (std::size_t s = 0; s < states; ++s) P[s * states + s] += 1.0;

  std::vector<double> result(states, 0.0), next(states);
  double accumulated = 0.0;
  const double log_mean = std::log(mean);
  for (std::size_t k = 0;; ++k) {
    const double weight = std::exp(-mean + static_cast<double>(k) * log_mean - std::lgamma(static_cast<double>(k) + 1.0));
    for (std::size_t s = 0; s < states; ++s) result[s] += weight * v[s];
    accumulated += weight;
    if (1.0 - accumulated < 1e-12 && static_cast<double>(k) > mean) break;
    if (k > 100000 + static_cast<std::size_t>(10.0 * mean)) throw Error("uniformization did not converge");
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t a = 0; a < states; ++a) {
      if (v[a] == 0.0) continue;
      for (std::size_t b = 0; b < states; ++b) next[b] += v[a] * P[a * states + b];
    }
    v.swap(next);
  }
  return {n, std::move(result)};
}

ExactDistribution ctmc_marginal_expm(std::span<const std::uint8_t> x0, const Landscape& landscape,
                                     const RateModel& rates, double horizon) {
  check_inputs(x0, landscape, rates, max_exact_patches);
  const std::size_t n = x0.size();
  const auto states = static_cast<Eigen::Index>(std::size_t{1} << n);
  const auto Q = generator_matrix(landscape, rates);
  Eigen::MatrixXd G(states, states);
  for (Eigen::Index a = 0; a < states; ++a) {
    for (Eigen::Index b = 0; b < states; ++b) G(a, b) = Q[static_cast<std::size_t>(a * states + b)] * horizon;
  }
  const Eigen::MatrixXd E = G.exp();
  const auto from = static_cast<Eigen::Index>(ExactDistribution::index_of(x0));
  std::vector<double> out(static_cast<std::size_t>(states));
  for (Eigen::Index b = 0; b < states; ++b) out[static_cast<std::size_t>(b)] = E(from, b);
  return {n, std::move(out)};
}

CoupledMoments exact_coupled_ct_moment(std::span<const std::uint8_t> x0, const Landscape& landscape,
                                       const RateModel& rates, double horizon, double step) {
  check_inputs(x0, landscape, rates, max_joint_patches);
  if (!(horizon >= 0.0)) throw Error("horizon must be non-negative");
  if (!(step > 0.0)) throw Error("step must be positive");
  const std::size_t n = x0.size();
  const std::size_t states = std::size_t{1} << (3 * n);
  const std::size_t dim = n + states;

  // Precomputed connectivity at X for each state.
  std::vector<std::vector<double>> s_x(states);
  for (std::size_t s = 0; s < states; ++s) {
    const Occupancy x = bits_of(s, n, 0);
    s_x[s] = landscape.connectivity(std::span<const std::uint8_t>(x));
  }

  // y = (p, pi)
  auto field = [&](const std::vector<double>& y, std::vector<double>& dy) {
    std::fill(dy.begin(), dy.end(), 0.0);
    std::vector<double> p(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
    for (auto& v : p) v = clamp01(v);
    const auto s_p = landscape.connectivity(std::span<const double>(p));
    for (std::size_t i = 0; i < n; ++i) {
      dy[i] = rates.colonisation_rate(i, s_p[i]) * (1.0 - p[i]) - rates.extinction_rate(i, s_p[i]) * p[i];
    }
    for (std::size_t s = 0; s < states; ++s) {
      const double mass = y[n + s];
      if (mass == 0.0) continue;
      for (std::size_t i = 0; i < n; ++i) {
        const bool x = (s >> i) & 1U;
        const bool w = (s >> (n + i)) & 1U;
        const MoveRates r =
            move_rates(w, x, rates.colonisation_rate(i, s_p[i]), rates.extinction_rate(i, s_p[i]),
                       rates.colonisation_rate(i, s_x[s][i]), rates.extinction_rate(i, s_x[s][i]));
        const std::size_t xbit = std::size_t{1} << i, wbit = std::size_t{1} << (n + i), jbit = std::size_t{1} << (2 * n + i);
        auto move = [&](double rate, std::size_t target) {
          if (rate <= 0.0) return;
          if (((target >> i) & 1U) != ((target >> (n + i)) & 1U)) target |= jbit;
          dy[n + s] -= mass * rate;
          dy[n + target] += mass * rate;
        };
        move(r.both, s ^ xbit ^ wbit);
        move(r.w_only, s ^ wbit);
        move(r.x_only, s ^ xbit);
      }
    }
  };

  std::vector<double> y(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) y[i] = x0[i];
  const std::size_t x_index = ExactDistribution::index_of(x0);
  y[n + (x_index | (x_index << n))] = 1.0;

  const auto count = static_cast<std::size_t>(std::max(1.0, std::ceil(horizon / step - 1e-9)));
  const double h = horizon / static_cast<double>(count);
  std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  for (std::size_t k = 0; k < count && horizon > 0.0; ++k) {
    field(y, k1);
    for (std::size_t q = 0; q < dim; ++q) tmp[q] = y[q] + 0.5 * h * k1[q];
    field(tmp, k2);
    for (std::size_t q = 0; q < dim; ++q) tmp[q] = y[q] + 0.5 * h * k2[q];
    field(tmp, k3);
    for (std::size_t q = 0; q < dim; ++q) tmp[q] = y[q] + h * k3[q];
    field(tmp, k4);
    for (std::size_t q = 0; q < dim; ++q) y[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
  }
  std::vector<double> pi(y.begin() + static_cast<std::ptrdiff_t>(n), y.end());
  for (auto& v : pi) v = std::max(v, 0.0);
  return moments_from_joint({3 * n, std::move(pi)}, n, landscape.weights());
}

}  // namespace metapop
