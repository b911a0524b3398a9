#include "metapop/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "metapop/error.hpp"

namespace metapop {

namespace {

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw Error(std::string(name) + " must be positive and finite");
}

void finish(TheoremBound& b) {
  b.valid = std::all_of(b.diagnostics.begin(), b.diagnostics.end(), [](const Precondition& p) { return p.satisfied; });
  b.probability = std::isnan(b.raw_probability) ? 1.0 : std::clamp(b.raw_probability, 0.0, 1.0);
  b.vacuous = b.threshold > 1.0;
}

Precondition integer_steps(double m, double T) {
  const double steps = m * T;
  const bool ok = std::abs(steps - std::round(steps)) <= 1e-9 * std::max(1.0, steps);
  return {"mT integer", ok, "mT = " + fmt(steps)};
}

// Ratio of the two H-type constants to H^2, infinite when H = 0.
double second_order(double num, const BoundConstants& c, double eps) {
  const double denom = c.H * c.H * static_cast<double>(c.n) * eps;
  return denom > 0.0 ? num / denom : std::numeric_limits<double>::infinity();
}

}  // namespace

double BoundConstants::ratio() const {
  if (!(A > 0.0)) {
    throw Error("A = 0: the rates do not depend on connectivity; use the constant-rate (independent patches) case");
  }
  return H / (A * a_bar);
}

BoundConstants bound_constants(const Landscape& landscape, const RateModel& rates) {
  const std::size_t n = landscape.size();
  if (rates.size() != n) throw Error("rate model and landscape sizes differ");
  BoundConstants c;
  c.n = n;
  if (n == 0) return c;
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto a = landscape.weights();
  const auto& s_max = landscape.max_connectivity();
  c.lipschitz = lipschitz_constants(rates, s_max).total;
  const auto& L = c.lipschitz;

  for (double v : a) c.a_bar += v;
  c.a_bar *= inv_n;

  c.beta_in.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double in_l = 0.0, sq = 0.0, out2 = 0.0;
    // Kernel is symmetric, so row i also holds the column s_ji.
    const auto row = landscape.kernel_row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double s = row[j];
      if (s == 0.0) continue;
      in_l += a[j] * L[j] * s;
      sq += (a[j] * s) * (a[j] * s);
      out2 += a[j] * a[j] * L[j] * s;
    }
    c.A = std::max(c.A, inv_n * in_l);
    c.beta_in[i] = std::sqrt(inv_n * sq);
    c.A2 = std::max(c.A2, inv_n * out2);
  }
  for (std::size_t i = 0; i < n; ++i) {
    c.H += a[i] * L[i] * c.beta_in[i];
    c.H2 += a[i] * a[i] * L[i] * c.beta_in[i];
  }
  c.H *= inv_n;
  c.H2 *= inv_n;

  const Rates sup = rate_suprema(rates, s_max);
  for (std::size_t i = 0; i < n; ++i) c.k = std::max({c.k, sup.colonisation[i], sup.extinction[i]});
  return c;
}

PsiResult psi(const Landscape& landscape, double theta) {
  require_positive(theta, "theta");
  PsiResult out;
  const std::size_t n = landscape.size();
  if (n == 0) return out;
  double a_bar = 0.0;
  for (double v : landscape.weights()) a_bar += v;
  a_bar /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (landscape.weights()[i] < theta * a_bar) out.indices.push_back(i);
  }
  out.value = static_cast<double>(out.indices.size()) / static_cast<double>(n);
  return out;
}

double eps_n(std::size_t n, double r) {
  if (n < 2) throw Error("eps_n needs n >= 2");
  if (!(r >= 0.0)) throw Error("eps_n needs r >= 0");
  const double nd = static_cast<double>(n);
  return std::sqrt(r * std::log(nd) / nd);
}

std::string to_string(TheoremId id) {
  switch (id) {
    case TheoremId::T1:
      return "T1";
    case TheoremId::T2:
      return "T2";
    case TheoremId::T3a:
      return "T3a";
    case TheoremId::T3b:
      return "T3b";
  }
  return "?";
}

TheoremBound theorem1_bound(const BoundConstants& c, double psi_value, double m, double T, int V, double theta,
                            double eta) {
  require_positive(theta, "theta");
  require_positive(eta, "eta");
  require_positive(m, "m");
  if (!(T >= 0.0)) throw Error("T must be non-negative");
  if (V < 0) throw Error("V must be non-negative");
  if (c.n < 1) throw Error("empty landscape");
  const double ratio = c.ratio();
  const double nd = static_cast<double>(c.n);

  TheoremBound b;
  b.theorem = TheoremId::T1;
  b.inputs = {theta, eta, 0.0, 0.0, T, m, V};
  b.diagnostics.push_back(integer_steps(m, T));
  b.threshold = psi_value + std::pow(nd, -0.5 + eta) * (ratio / theta * std::exp(c.A * T) + 1.0);
  const double log_first =
      std::log(2.0 * m * T) + V * std::log(nd + 1.0) - 2.0 * std::pow(nd, 2.0 * eta);
  const double first = T > 0.0 ? std::exp(log_first) : 0.0;
  b.raw_probability = first + std::pow(nd, -eta);
  finish(b);
  return b;
}

TheoremBound theorem2_bound(const BoundConstants& c, double psi_value, double m, double T, int V, double theta,
                            double r) {
  require_positive(theta, "theta");
  require_positive(r, "r");
  require_positive(m, "m");
  if (!(T >= 0.0)) throw Error("T must be non-negative");
  if (V < 0) throw Error("V must be non-negative");
  const double ratio = c.ratio();
  const double nd = static_cast<double>(c.n);
  const double logn = std::log(nd);
  const double eps = eps_n(c.n, r);

  TheoremBound b;
  b.theorem = TheoremId::T2;
  b.inputs = {theta, 0.0, r, 0.0, T, m, V};
  b.diagnostics.push_back(integer_steps(m, T));
  b.diagnostics.push_back({"r <= n/log n", r <= nd / logn, "n/log n = " + fmt(nd / logn)});
  const double lhs = (2.0 * r - V - 1.0) * logn;
  const double rhs = std::log(m / c.A);
  b.diagnostics.push_back({"(2r-V-1) log n >= log(m/A)", lhs >= rhs, fmt(lhs) + " vs " + fmt(rhs)});
  b.threshold = psi_value + (2.0 * ratio / theta * std::exp(c.A * T) + 1.0) * eps;
  const double at = c.A * T;
  b.raw_probability = 2.0 * at / nd + std::pow(2.0, V + 1) * at / nd + second_order(c.A2 * c.H + c.H2 * c.A, c, eps);
  finish(b);
  return b;
}

Theorem3Bounds theorem3_bound(const BoundConstants& c, double psi_value, double T, int V, double theta, double eta,
                              double alpha, double r) {
  require_positive(theta, "theta");
  require_positive(eta, "eta");
  require_positive(r, "r");
  if (!(alpha >= 0.0)) throw Error("alpha must be non-negative");
  if (!(T >= 0.0)) throw Error("T must be non-negative");
  if (V < 0) throw Error("V must be non-negative");
  const double ratio = c.ratio();
  const double nd = static_cast<double>(c.n);
  const double logn = std::log(nd);
  const double eps = eps_n(c.n, r);

  std::vector<Precondition> diag;
  diag.push_back({"A/n <= k", c.A / nd <= c.k, "A/n = " + fmt(c.A / nd) + ", k = " + fmt(c.k)});
  diag.push_back(
      {"k <= A n^alpha", c.k <= c.A * std::pow(nd, alpha), "k = " + fmt(c.k) + ", A n^alpha = " + fmt(c.A * std::pow(nd, alpha))});
  const double need = V + 5.0 + 2.0 * alpha + (V + 1.0) * std::log(2.0) / logn;
  diag.push_back({"2r > V + 5 + 2 alpha + (V+1) log 2 / log n", 2.0 * r > need, "2r = " + fmt(2.0 * r) + ", need > " + fmt(need)});

  const double growth = std::exp(c.A * T);
  const double base_threshold = psi_value + 2.0 / nd + eps;
  const double base_probability = 5.0 * (c.A * T + 1.0) / nd;

  Theorem3Bounds out;
  out.first.theorem = TheoremId::T3a;
  out.first.inputs = {theta, eta, r, alpha, T, 0.0, V};
  out.first.diagnostics = diag;
  out.first.threshold = base_threshold + std::pow(nd, -0.5 + eta) / theta * growth;
  out.first.raw_probability = base_probability + ratio * std::pow(nd, -eta) * std::sqrt(r * logn);
  finish(out.first);

  out.second.theorem = TheoremId::T3b;
  out.second.inputs = out.first.inputs;
  out.second.diagnostics = diag;
  out.second.threshold = base_threshold + 2.0 * eps * ratio / theta * growth;
  out.second.raw_probability = base_probability + second_order(2.0 * c.A2 * c.H + c.A * c.H2, c, eps) / 2.0;
  finish(out.second);
  return out;
}

}  // namespace metapop
