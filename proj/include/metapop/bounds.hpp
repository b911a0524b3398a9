#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "metapop/landscape.hpp"
#include "metapop/rates.hpp"

namespace metapop {

/// Landscape and rate constants entering the approximation bounds.
struct BoundConstants {
  std::size_t n = 0;
  double a_bar = 0.0;
  std::vector<double> lipschitz;  // L_i = L_i(C) + L_i(E)
  std::vector<double> beta_in;    // beta_in^2 = n^{-1} sum_j (a_j s_ji)^2
  double A = 0.0;                 // n^{-1} max_i sum_j a_j L_j s_ji
  double H = 0.0;                 // n^{-1} sum_i a_i L_i beta_in
  double A2 = 0.0;                // max_j n^{-1} sum_i a_i^2 L_i s_ij
  double H2 = 0.0;                // n^{-1} sum_i a_i^2 L_i beta_in
  double k = 0.0;                 // max_i max(sup C_i, sup E_i)

  /// H / (A a_bar); throws when A = 0.
  double ratio() const;
};

BoundConstants bound_constants(const Landscape& landscape, const RateModel& rates);

struct PsiResult {
  double value = 0.0;
  std::vector<std::size_t> indices;  // {i : a_i < theta a_bar}
};

PsiResult psi(const Landscape& landscape, double theta);

/// n^{-1/2} sqrt(r log n); throws for n < 2.
double eps_n(std::size_t n, double r);

enum class TheoremId { T1, T2, T3a, T3b };
std::string to_string(TheoremId id);

struct Precondition {
  std::string name;
  bool satisfied = true;
  std::string detail;
};

struct TheoremInputs {
  double theta = 1.0;
  double eta = 0.0;
  double r = 0.0;
  double alpha = 0.0;
  double T = 1.0;
  double m = 1.0;
  int V = 0;
};

struct TheoremBound {
  TheoremId theorem = TheoremId::T1;
  double threshold = 0.0;
  double probability = 0.0;  // clamped to [0, 1]
  double raw_probability = 0.0;
  TheoremInputs inputs;
  std::vector<Precondition> diagnostics;
  bool valid = true;    // all preconditions hold
  bool vacuous = false; // threshold > 1
};

/// Threshold psi + n^{-1/2+eta}{(H/(A a_bar)) theta^{-1} e^{AT} + 1}, probability
/// 2 m T (n+1)^V e^{-2 n^{2 eta}} + n^{-eta}. Throws when A = 0.
TheoremBound theorem1_bound(const BoundConstants& c, double psi_value, double m, double T, int V, double theta,
                            double eta);

/// Threshold psi + {2 (H/(A a_bar)) theta^{-1} e^{AT} + 1} eps_n(r), probability
/// 2AT/n + 2^{V+1} AT/n + (A2 H + H2 A)/(H^2 n eps_n(r)).
TheoremBound theorem2_bound(const BoundConstants& c, double psi_value, double m, double T, int V, double theta,
                            double r);

struct Theorem3Bounds {
  TheoremBound first;
  TheoremBound second;
};

Theorem3Bounds theorem3_bound(const BoundConstants& c, double psi_value, double T, int V, double theta, double eta,
                              double alpha, double r);

}  // namespace metapop
