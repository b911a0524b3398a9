#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "metapop/bounds.hpp"
#include "metapop/config.hpp"
#include "metapop/discrete.hpp"
#include "metapop/landscape.hpp"
#include "metapop/measures.hpp"
#include "metapop/rates.hpp"

namespace metapop {

inline constexpr const char* version = "1.0.0";

enum class ExperimentKind { Contact, Poisson, Convergence, TheoremVerify, BoundSweep };
ExperimentKind parse_experiment_kind(const std::string& text);
std::string to_string(ExperimentKind kind);

/// Everything an experiment needs, read from flat key/value text.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::TheoremVerify;
  std::string landscape = "equal";  // equal | ring | poisson | grid | file
  std::string landscape_file;
  std::string kernel = "exponential:1";
  std::string colonisation = "linear(1)";
  std::string extinction = "const(0.5)";
  std::vector<std::size_t> n_values{100};
  int dimension = 1;
  std::vector<double> rd_values{50.0};  // R^d for the top-hat kernel
  double lambda = 1.0;
  double m = 1.0;
  double T = 1.0;
  bool continuous = false;
  double initial = 1.0;  // 1 = all occupied, otherwise Bernoulli(initial) with a fixed seed
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  VCFamily family{FamilyKind::Rectangles, 2};
  std::vector<double> theta{1.0};
  std::vector<double> eta{0.25};
  std::vector<double> r{2.0};
  std::vector<double> alpha{0.1};
  double checkpoint_step = 0.01;
  KeyValues source;

  static ExperimentConfig from(const KeyValues& kv);
};

/// Plain string table written as CSV.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
  std::string csv() const;
};

/// Shortest text that round-trips the double.
std::string format_number(double v);

struct ExperimentResult {
  std::string kind;
  Table results;
  std::map<std::string, Table> tables;  // auxiliary CSV outputs by file stem
  nlohmann::json summary = nlohmann::json::object();
  nlohmann::json bounds = nlohmann::json::object();
  nlohmann::json manifest = nlohmann::json::object();
};

/// Writes results.csv, bounds.json, manifest.json, summary.json and the
/// auxiliary tables into `directory` (created if missing).
void write_outputs(const ExperimentResult& result, const std::string& directory);

nlohmann::json to_json(const BoundConstants& c);
nlohmann::json to_json(const TheoremBound& b);

/// Landscape and rate model described by the config for patch count n.
Landscape make_landscape(const ExperimentConfig& config, std::size_t n);
RateModel make_rates(const ExperimentConfig& config, std::size_t n);
Occupancy make_initial_state(const ExperimentConfig& config, std::size_t n);

/// n patches of weight one at z = 0..n-1 with s_ij = 1 for i != j.
Landscape equal_patch_landscape(std::size_t n);
/// Cycle of n sites with weights n, so that S_i(x) = x_{i-1} + x_{i+1}.
Landscape contact_ring_landscape(std::size_t n);

/// Least-squares slope of y on x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);
double median(std::vector<double> values);

/// Contact process on a cycle, C_i = lambda (x_{i-1} + x_{i+1}), E_i = 1,
/// from the all-occupied state. Runs are capped at 50 log n time units; the
/// mean-field ODE is integrated to T = 50. The summary holds per-n median
/// extinction times and the log-log slope of the median against log n.
ExperimentResult run_contact_experiment(const std::vector<std::size_t>& n_values, double lambda, std::size_t reps,
                                        std::uint64_t seed, unsigned workers = 0);

struct PoissonSettings {
  std::size_t n = 4000;
  int d = 2;
  std::vector<double> rd_values{50.0, 200.0, 800.0};
  double T = 2.0;
  std::size_t reps = 50;
  std::uint64_t seed = 1;
  double extinction = 0.5;
  double initial = 1.0;
  double theta = 1.0, eta = 0.25, alpha = 0.1, r = 5.0;
  unsigned workers = 0;
};

/// Uniform patches on [0, n^{1/d}]^d, a_i = n, top-hat kernel, f_C(s) = s and
/// constant extinction. Reports neighbour counts against v(d) R^d and the
/// rectangle discrepancy at time T for each R^d.
ExperimentResult run_poisson_experiment(const PoissonSettings& settings);

/// Coupled runs against the theorem thresholds; counts exceedances of
/// max_t sup_B |X_t{B} - p_t{B}|.
ExperimentResult run_theorem_verification(const ExperimentConfig& config);

/// Mean of max_t sup_B |X_t{B} - p_t{B}| across n and its log-log slope.
ExperimentResult run_convergence_study(const ExperimentConfig& config);

/// Theorem bounds over the theta x eta x r x alpha grid.
ExperimentResult run_bound_sweep(const ExperimentConfig& config);

ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace metapop
