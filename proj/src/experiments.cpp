#include "metapop/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "metapop/continuous.hpp"
#include "metapop/error.hpp"
#include "metapop/parallel.hpp"
#include "metapop/random.hpp"

namespace metapop {

using nlohmann::json;

namespace {

std::uint64_t parse_seed(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used, 0);
    if (used != text.size()) throw Error("");
    return v;
  } catch (...) {
    throw Error("seed must be a non-negative integer, got '" + text + "'");
  }
}

std::size_t as_count(double v, const char* what) {
  if (!(v >= 1.0) || v != std::floor(v)) throw Error(std::string(what) + " must be a positive integer");
  return static_cast<std::size_t>(v);
}

std::string flag(bool b) { return b ? "1" : "0"; }

// Finite doubles as numbers, everything else as null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double mean_of(const std::vector<double>& v) {
  return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                   : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

json manifest_for(const std::string& kind, std::uint64_t seed, const KeyValues& config) {
  json entries = json::object();
  for (const auto& [k, v] : config.entries()) entries[k] = v;
  return {{"kind", kind},
          {"version", version},
          {"seed", seed},
          {"config_hash", fnv1a_hex(config.canonical())},
          {"config", entries}};
}

struct RunOutcome {
  double max_sup = 0.0;    // max_t sup_B |X_t{B} - p_t{B}|
  double max_sup_w = 0.0;  // max_t sup_B |W_t{B} - p_t{B}|
  double final_z = 0.0;    // sum_i a_i J_i at the horizon
};

RunOutcome discrete_run(const Landscape& landscape, const RateModel& rates, double m, double horizon,
                        const Occupancy& x0, std::uint64_t seed, const DiscrepancyScanner& scanner) {
  const std::size_t steps = step_count(m, horizon);
  const std::size_t n = x0.size();
  CoupledChain chain(landscape, rates, m, x0);
  RandomStream rng(seed);
  std::vector<double> diff(n);
  RunOutcome out;
  for (std::size_t t = 1; t <= steps; ++t) {
    chain.advance(rng);
    for (std::size_t i = 0; i < n; ++i) diff[i] = chain.x()[i] - chain.p()[i];
    out.max_sup = std::max(out.max_sup, scanner.scan(diff).sup);
    for (std::size_t i = 0; i < n; ++i) diff[i] = chain.w()[i] - chain.p()[i];
    out.max_sup_w = std::max(out.max_sup_w, scanner.scan(diff).sup);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (chain.j()[i]) out.final_z += landscape.weights()[i];
  }
  return out;
}

// The supremum over time is taken over every event time and a regular grid.
RunOutcome continuous_run(const Landscape& landscape, const RateModel& rates, double horizon, const OdePath& ode,
                          const Occupancy& x0, std::uint64_t seed, const DiscrepancyScanner& scanner,
                          double checkpoint_step) {
  const std::size_t n = x0.size();
  std::vector<double> marks;
  for (std::size_t k = 1; static_cast<double>(k) * checkpoint_step < horizon; ++k) {
    marks.push_back(static_cast<double>(k) * checkpoint_step);
  }
  marks.push_back(horizon);
  std::vector<double> p(n), diff(n);
  RunOutcome out;
  run_coupled_ct(x0, landscape, rates, horizon, seed, ode, marks, [&](double t, const CoupledCtState& s) {
    ode.at_into(t, p);
    for (std::size_t i = 0; i < n; ++i) diff[i] = s.x[i] - p[i];
    out.max_sup = std::max(out.max_sup, scanner.scan(diff).sup);
    for (std::size_t i = 0; i < n; ++i) diff[i] = s.w[i] - p[i];
    out.max_sup_w = std::max(out.max_sup_w, scanner.scan(diff).sup);
    out.final_z = s.z;
  });
  return out;
}

VCFamily family_for(const ExperimentConfig& config, const Landscape& landscape) {
  VCFamily f = config.family;
  f.dim = landscape.dimension() + 1;
  return f;
}

}  // namespace

ExperimentKind parse_experiment_kind(const std::string& text) {
  if (text == "contact") return ExperimentKind::Contact;
  if (text == "poisson") return ExperimentKind::Poisson;
  if (text == "convergence") return ExperimentKind::Convergence;
  if (text == "verify" || text == "theorem-verify") return ExperimentKind::TheoremVerify;
  if (text == "bound-sweep" || text == "sweep") return ExperimentKind::BoundSweep;
  throw Error("unknown experiment kind '" + text + "'");
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Contact:
      return "contact";
    case ExperimentKind::Poisson:
      return "poisson";
    case ExperimentKind::Convergence:
      return "convergence";
    case ExperimentKind::TheoremVerify:
      return "verify";
    case ExperimentKind::BoundSweep:
      return "bound-sweep";
  }
  return "?";
}

ExperimentConfig ExperimentConfig::from(const KeyValues& kv) {
  ExperimentConfig c;
  c.source = kv;
  if (kv.contains("experiment")) c.kind = parse_experiment_kind(kv.get("experiment"));
  c.landscape = kv.get_or("landscape", c.landscape);
  c.landscape_file = kv.get_or("landscape_file", c.landscape_file);
  c.kernel = kv.get_or("kernel", c.kernel);
  c.colonisation = kv.get_or("colonisation", c.colonisation);
  c.extinction = kv.get_or("extinction", c.extinction);
  if (kv.contains("n")) {
    c.n_values.clear();
    for (double v : kv.numbers("n")) c.n_values.push_back(as_count(v, "n"));
    if (c.n_values.empty()) throw Error("n list is empty");
  }
  c.dimension = static_cast<int>(as_count(kv.number_or("dimension", c.dimension), "dimension"));
  c.rd_values = kv.numbers_or("rd", c.rd_values);
  c.lambda = kv.number_or("lambda", c.lambda);
  c.m = kv.number_or("m", c.m);
  c.T = kv.number_or("T", c.T);
  const std::string time = kv.get_or("time", c.continuous ? "continuous" : "discrete");
  if (time != "discrete" && time != "continuous") throw Error("time must be discrete or continuous");
  c.continuous = time == "continuous";
  c.initial = kv.number_or("initial", c.initial);
  c.reps = as_count(kv.number_or("reps", static_cast<double>(c.reps)), "reps");
  if (kv.contains("seed")) c.seed = parse_seed(kv.get("seed"));
  c.workers = static_cast<unsigned>(std::max(0.0, kv.number_or("workers", 0.0)));
  c.family.kind = parse_family(kv.get_or("family", to_string(c.family.kind)));
  c.theta = kv.numbers_or("theta", c.theta);
  c.eta = kv.numbers_or("eta", c.eta);
  c.r = kv.numbers_or("r", c.r);
  c.alpha = kv.numbers_or("alpha", c.alpha);
  c.checkpoint_step = kv.number_or("checkpoint_step", c.checkpoint_step);
  if (c.theta.empty() || c.eta.empty() || c.r.empty() || c.alpha.empty()) throw Error("parameter grids must be non-empty");
  if (!(c.T >= 0.0) || !(c.m > 0.0)) throw Error("need T >= 0 and m > 0");
  if (!(c.initial > 0.0 && c.initial <= 1.0)) throw Error("initial occupancy must lie in (0, 1]");
  if (!(c.checkpoint_step > 0.0)) throw Error("checkpoint_step must be positive");
  return c;
}

void Table::add(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw Error("table row has the wrong number of cells");
  rows.push_back(std::move(row));
}

std::string Table::csv() const {
  std::ostringstream out;
  for (std::size_t k = 0; k < columns.size(); ++k) out << (k ? "," : "") << columns[k];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << row[k];
    out << '\n';
  }
  return out.str();
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

void write_outputs(const ExperimentResult& result, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(fs::path(directory) / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (fs::path(directory) / name).string());
    out << text;
  };
  write("results.csv", result.results.csv());
  for (const auto& [stem, table] : result.tables) write(stem + ".csv", table.csv());
  write("bounds.json", result.bounds.dump(2) + "\n");
  write("summary.json", result.summary.dump(2) + "\n");
  write("manifest.json", result.manifest.dump(2) + "\n");
}

json to_json(const BoundConstants& c) {
  json out = {{"n", c.n}, {"a_bar", c.a_bar}, {"A", c.A}, {"H", c.H}, {"A2", c.A2}, {"H2", c.H2}, {"k", c.k}};
  if (c.A > 0.0) {
    out["H_over_A_abar"] = c.ratio();
    if (c.H > 0.0) out["second_order_ratio"] = (c.A2 * c.H + c.H2 * c.A) / (c.H * c.H);
  }
  const auto [lo, hi] = std::minmax_element(c.beta_in.begin(), c.beta_in.end());
  if (lo != c.beta_in.end()) out["beta_in_range"] = {*lo, *hi};
  const auto [llo, lhi] = std::minmax_element(c.lipschitz.begin(), c.lipschitz.end());
  if (llo != c.lipschitz.end()) out["lipschitz_range"] = {*llo, *lhi};
  return out;
}

json to_json(const TheoremBound& b) {
  json diag = json::array();
  for (const auto& d : b.diagnostics) diag.push_back({{"name", d.name}, {"satisfied", d.satisfied}, {"detail", d.detail}});
  return {{"theorem", to_string(b.theorem)},
          {"threshold", number_or_null(b.threshold)},
          {"probability", b.probability},
          {"raw_probability", number_or_null(b.raw_probability)},
          {"valid", b.valid},
          {"vacuous", b.vacuous},
          {"inputs",
           {{"theta", b.inputs.theta},
            {"eta", b.inputs.eta},
            {"r", b.inputs.r},
            {"alpha", b.inputs.alpha},
            {"T", b.inputs.T},
            {"m", b.inputs.m},
            {"V", b.inputs.V}}},
          {"diagnostics", diag}};
}

Landscape equal_patch_landscape(std::size_t n) {
  if (n == 0) throw Error("need at least one patch");
  std::vector<Patch> patches(n);
  for (std::size_t i = 0; i < n; ++i) patches[i] = {{static_cast<double>(i)}, 1.0};
  ExplicitKernel k{std::vector<double>(n * n, 1.0)};
  for (std::size_t i = 0; i < n; ++i) k.matrix[i * n + i] = 0.0;
  return Landscape::build(std::move(patches), k);
}

Landscape contact_ring_landscape(std::size_t n) {
  if (n < 3) throw Error("the contact ring needs n >= 3");
  std::vector<Patch> patches(n);
  for (std::size_t i = 0; i < n; ++i) patches[i] = {{static_cast<double>(i + 1)}, static_cast<double>(n)};
  return Landscape::build(std::move(patches), RingKernel{});
}

Landscape make_landscape(const ExperimentConfig& config, std::size_t n) {
  if (config.landscape == "equal") return equal_patch_landscape(n);
  if (config.landscape == "ring") return contact_ring_landscape(n);
  if (config.landscape == "poisson") {
    const double radius = std::pow(config.rd_values.at(0), 1.0 / config.dimension);
    return generate_landscape(UniformBoxLayout{n, config.dimension, config.seed}, TopHatKernel{radius});
  }
  if (config.landscape == "grid") return generate_landscape(GridLayout{n, config.dimension}, parse_kernel(config.kernel));
  if (config.landscape == "file") {
    auto l = load_landscape(config.landscape_file);
    if (l.size() != n) throw Error("landscape file has a different patch count than n");
    return l;
  }
  throw Error("unknown landscape kind '" + config.landscape + "'");
}

RateModel make_rates(const ExperimentConfig& config, std::size_t n) {
  return RateModel::uniform(n, parse_rate(config.colonisation), parse_rate(config.extinction));
}

Occupancy make_initial_state(const ExperimentConfig& config, std::size_t n) {
  Occupancy x(n, 1);
  if (config.initial >= 1.0) return x;
  RandomStream rng(replicate_seed(config.seed, std::numeric_limits<std::uint64_t>::max()));
  for (auto& v : x) v = rng.uniform() < config.initial;
  return x;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error("fit_slope: length mismatch");
  if (x.size() < 2) throw Error("slope needs at least two points");
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  if (sxx == 0.0) throw Error("slope undefined: all x values coincide");
  return sxy / sxx;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  return values.size() % 2 ? values[h] : 0.5 * (values[h - 1] + values[h]);
}

ExperimentResult run_contact_experiment(const std::vector<std::size_t>& n_values, double lambda, std::size_t reps,
                                        std::uint64_t seed, unsigned workers) {
  if (!(lambda > 0.0)) throw Error("lambda must be positive");
  if (reps < 1) throw Error("reps must be positive");
  constexpr double ode_horizon = 50.0;
  ExperimentResult out;
  out.kind = "contact";
  out.results.columns = {"n", "rep", "seed", "extinction_time", "censored"};
  Table trajectory;
  trajectory.columns = {"n", "t", "tv", "sup_rectangles", "occupied_fraction", "ode_mean"};
  json per_n = json::array();
  std::vector<double> log_n, log_log_n, medians, log_medians;

  for (std::size_t n : n_values) {
    const Landscape landscape = contact_ring_landscape(n);
    const RateModel rates = RateModel::uniform(n, LinearRate{lambda}, ConstantRate{1.0});
    const Occupancy x0(n, 1);
    const double cap = 50.0 * std::log(static_cast<double>(n));
    const std::uint64_t base = replicate_seed(seed, n);

    std::vector<double> times(reps);
    std::vector<char> censored(reps);
    EventPath first;
    parallel_for(
        reps,
        [&](std::size_t r) {
          EventPath path = simulate_ctmc(x0, landscape, rates, cap, replicate_seed(base, r));
          censored[r] = !path.absorbed;
          times[r] = path.absorbed ? path.absorption_time : std::numeric_limits<double>::infinity();
          if (r == 0) first = std::move(path);
        },
        workers);
    for (std::size_t r = 0; r < reps; ++r) {
      out.results.add({std::to_string(n), std::to_string(r), std::to_string(replicate_seed(base, r)),
                       format_number(std::isfinite(times[r]) ? times[r] : cap), flag(censored[r])});
    }

    const std::vector<double> ones(n, 1.0);
    const OdePath ode = integrate_ode(ones, landscape, rates, ode_horizon, default_ode_step(landscape, rates));
    const auto terminal = ode.at_grid(ode.grid_points() - 1);
    const auto [lo, hi] = std::minmax_element(terminal.begin(), terminal.end());

    DiscrepancyScanner scanner(attribute_points(landscape), VCFamily{FamilyKind::Rectangles, 2});
    std::vector<double> p(n), diff(n);
    for (int t = 0; t <= static_cast<int>(ode_horizon); ++t) {
      const Occupancy x = first.state_at(t);
      ode.at_into(t, p);
      for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - p[i];
      const double occupied = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
      trajectory.add({std::to_string(n), std::to_string(t), format_number(tv_distance(x, p)),
                      format_number(scanner.scan(diff).sup), format_number(occupied),
                      format_number(std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(n))});
    }

    const double med = median(times);
    const auto censored_count = static_cast<std::size_t>(std::count(censored.begin(), censored.end(), 1));
    per_n.push_back({{"n", n},
                     {"median_extinction_time", number_or_null(med)},
                     {"censored", censored_count},
                     {"cap", cap},
                     {"ode_terminal_min", *lo},
                     {"ode_terminal_max", *hi}});
    const double ln = std::log(static_cast<double>(n));
    log_n.push_back(ln);
    log_log_n.push_back(std::log(ln));
    medians.push_back(med);
    log_medians.push_back(std::log(med));
  }

  out.summary = {{"lambda", lambda}, {"reps", reps}, {"per_n", per_n}};
  const bool finite = std::all_of(medians.begin(), medians.end(), [](double v) { return std::isfinite(v); });
  if (n_values.size() >= 2 && finite) {
    // Elasticity of the median with respect to log n; 1 for exact proportionality.
    out.summary["slope_log_median_vs_log_log_n"] = fit_slope(log_log_n, log_medians);
    out.summary["slope_median_vs_log_n"] = fit_slope(log_n, medians);
  } else {
    out.summary["slope_log_median_vs_log_log_n"] = nullptr;
    out.summary["slope_median_vs_log_n"] = nullptr;
  }
  out.tables["trajectory"] = std::move(trajectory);

  KeyValues kv;
  std::string ns;
  for (std::size_t k = 0; k < n_values.size(); ++k) ns += (k ? "," : "") + std::to_string(n_values[k]);
  kv.set("experiment", "contact");
  kv.set("n", ns);
  kv.set("lambda", format_number(lambda));
  kv.set("reps", std::to_string(reps));
  kv.set("seed", std::to_string(seed));
  out.manifest = manifest_for("contact", seed, kv);
  out.bounds = {{"note", "constant extinction with linear colonisation on a cycle"}};
  {
    const std::size_t n = n_values.empty() ? 3 : n_values.front();
    const Landscape l = contact_ring_landscape(n);
    out.bounds["constants"] = to_json(bound_constants(l, RateModel::uniform(n, LinearRate{lambda}, ConstantRate{1.0})));
  }
  return out;
}

ExperimentResult run_poisson_experiment(const PoissonSettings& s) {
  if (s.rd_values.empty()) throw Error("need at least one R^d value");
  if (s.reps < 1) throw Error("reps must be positive");
  if (!(s.extinction >= 0.0)) throw Error("extinction rate must be non-negative");
  ExperimentResult out;
  out.kind = "poisson";
  out.results.columns = {"rd", "rep", "seed", "sup_x_p", "sup_w_p", "sup_x_w", "tv_x_p", "z"};
  json per_rd = json::array();
  json bounds_per_rd = json::array();
  std::vector<double> log_rd, log_sup, log_sup_xw;

  for (double rd : s.rd_values) {
    if (!(rd > 0.0)) throw Error("R^d must be positive");
    const double radius = std::pow(rd, 1.0 / s.d);
    const Landscape landscape = generate_landscape(UniformBoxLayout{s.n, s.d, s.seed}, TopHatKernel{radius});
    const RateModel rates = RateModel::uniform(s.n, LinearRate{1.0}, ConstantRate{s.extinction});

    const double expected = unit_ball_volume(s.d) * rd;
    std::size_t max_count = 0, within = 0;
    for (std::size_t i = 0; i < s.n; ++i) {
      const std::size_t count = landscape.degree(i) + 1;
      max_count = std::max(max_count, count);
      if (std::abs(static_cast<double>(count) / expected - 1.0) <= 0.3) ++within;
    }

    ExperimentConfig init;
    init.initial = s.initial;
    init.seed = s.seed;
    const Occupancy x0 = make_initial_state(init, s.n);
    const std::vector<double> p0(x0.begin(), x0.end());
    const OdePath ode = integrate_ode(p0, landscape, rates, s.T, default_ode_step(landscape, rates));
    const auto pT = ode.at_grid(ode.grid_points() - 1);
    const DiscrepancyScanner scanner(attribute_points(landscape), VCFamily{FamilyKind::Rectangles, s.d + 1});

    struct Rep {
      double sup_xp, sup_wp, sup_xw, tv, z;
    };
    std::vector<Rep> reps(s.reps);
    const std::uint64_t base = replicate_seed(s.seed, static_cast<std::uint64_t>(std::llround(rd)));
    const std::vector<double> marks{s.T};
    parallel_for(
        s.reps,
        [&](std::size_t r) {
          Occupancy x, w;
          double z = 0.0;
          run_coupled_ct(x0, landscape, rates, s.T, replicate_seed(base, r), ode, marks,
                         [&](double t, const CoupledCtState& st) {
                           if (st.patch == CoupledCtState::no_event && t >= s.T) {
                             x = st.x;
                             w = st.w;
                             z = st.z;
                           }
                         });
          if (x.empty()) {
            x = x0;
            w = x0;
          }
          std::vector<double> diff(s.n);
          for (std::size_t i = 0; i < s.n; ++i) diff[i] = x[i] - pT[i];
          const double sup_xp = scanner.scan(diff).sup;
          for (std::size_t i = 0; i < s.n; ++i) diff[i] = w[i] - pT[i];
          const double sup_wp = scanner.scan(diff).sup;
          for (std::size_t i = 0; i < s.n; ++i) diff[i] = static_cast<double>(x[i]) - static_cast<double>(w[i]);
          const double sup_xw = scanner.scan(diff).sup;
          reps[r] = {sup_xp, sup_wp, sup_xw, tv_distance(x, pT), z};
        },
        s.workers);

    std::vector<double> xp, wp, xw, tv;
    for (std::size_t r = 0; r < s.reps; ++r) {
      const Rep& v = reps[r];
      out.results.add({format_number(rd), std::to_string(r), std::to_string(replicate_seed(base, r)),
                       format_number(v.sup_xp), format_number(v.sup_wp), format_number(v.sup_xw), format_number(v.tv),
                       format_number(v.z)});
      xp.push_back(v.sup_xp);
      wp.push_back(v.sup_wp);
      xw.push_back(v.sup_xw);
      tv.push_back(v.tv);
    }

    const BoundConstants constants = bound_constants(landscape, rates);
    json t3 = json::object();
    try {
      const auto b = theorem3_bound(constants, psi(landscape, s.theta).value, s.T, 2 * (s.d + 1), s.theta, s.eta,
                                    s.alpha, s.r);
      t3 = {{"T3a", to_json(b.first)}, {"T3b", to_json(b.second)}};
    } catch (const Error& e) {
      t3 = {{"error", e.what()}};
    }
    bounds_per_rd.push_back({{"rd", rd}, {"constants", to_json(constants)}, {"theorem3", t3}});

    per_rd.push_back({{"rd", rd},
                      {"radius", radius},
                      {"expected_neighbours", expected},
                      {"max_neighbours", max_count},
                      {"max_over_expected", static_cast<double>(max_count) / expected},
                      {"fraction_within_30pct", static_cast<double>(within) / static_cast<double>(s.n)},
                      {"mean_sup_x_p", mean_of(xp)},
                      {"sd_sup_x_p", sd_of(xp)},
                      {"mean_sup_w_p", mean_of(wp)},
                      {"mean_sup_x_w", mean_of(xw)},
                      {"mean_tv_x_p", mean_of(tv)}});
    log_rd.push_back(std::log(rd));
    log_sup.push_back(std::log(mean_of(xp)));
    log_sup_xw.push_back(std::log(std::max(mean_of(xw), std::numeric_limits<double>::min())));
  }

  out.summary = {{"n", s.n}, {"d", s.d}, {"T", s.T}, {"reps", s.reps}, {"extinction", s.extinction},
                 {"initial", s.initial}, {"per_rd", per_rd}};
  if (s.rd_values.size() >= 2) {
    out.summary["slope_sup_x_p_vs_rd"] = fit_slope(log_rd, log_sup);
    out.summary["slope_sup_x_w_vs_rd"] = fit_slope(log_rd, log_sup_xw);
  }
  out.bounds = {{"per_rd", bounds_per_rd}};

  KeyValues kv;
  std::string rds;
  for (std::size_t k = 0; k < s.rd_values.size(); ++k) rds += (k ? "," : "") + format_number(s.rd_values[k]);
  kv.set("experiment", "poisson");
  kv.set("n", std::to_string(s.n));
  kv.set("dimension", std::to_string(s.d));
  kv.set("rd", rds);
  kv.set("T", format_number(s.T));
  kv.set("reps", std::to_string(s.reps));
  kv.set("seed", std::to_string(s.seed));
  kv.set("extinction", format_number(s.extinction));
  kv.set("initial", format_number(s.initial));
  out.manifest = manifest_for("poisson", s.seed, kv);
  return out;
}

ExperimentResult run_theorem_verification(const ExperimentConfig& config) {
  const std::size_t n = config.n_values.at(0);
  const Landscape landscape = make_landscape(config, n);
  const RateModel rates = make_rates(config, n);
  const Occupancy x0 = make_initial_state(config, n);
  const VCFamily family = family_for(config, landscape);
  const int V = family.vc_dimension();
  const DiscrepancyScanner scanner(attribute_points(landscape), family);
  const BoundConstants constants = bound_constants(landscape, rates);
  const double theta = config.theta.front(), eta = config.eta.front(), r = config.r.front(),
               alpha = config.alpha.front();
  const double psi_value = psi(landscape, theta).value;

  std::vector<TheoremBound> bounds;
  json bound_errors = json::array();
  try {
    if (config.continuous) {
      const auto b = theorem3_bound(constants, psi_value, config.T, V, theta, eta, alpha, r);
      bounds.push_back(b.first);
      bounds.push_back(b.second);
    } else {
      bounds.push_back(theorem1_bound(constants, psi_value, config.m, config.T, V, theta, eta));
      bounds.push_back(theorem2_bound(constants, psi_value, config.m, config.T, V, theta, r));
    }
  } catch (const Error& e) {
    bound_errors.push_back(e.what());
  }

  std::vector<RunOutcome> runs(config.reps);
  if (config.continuous) {
    const OdePath ode = integrate_ode(std::vector<double>(x0.begin(), x0.end()), landscape, rates, config.T,
                                      default_ode_step(landscape, rates));
    parallel_for(
        config.reps,
        [&](std::size_t k) {
          runs[k] = continuous_run(landscape, rates, config.T, ode, x0, replicate_seed(config.seed, k), scanner,
                                   config.checkpoint_step);
        },
        config.workers);
  } else {
    parallel_for(
        config.reps,
        [&](std::size_t k) {
          runs[k] = discrete_run(landscape, rates, config.m, config.T, x0, replicate_seed(config.seed, k), scanner);
        },
        config.workers);
  }

  ExperimentResult out;
  out.kind = "verify";
  out.results.columns = {"rep", "seed", "max_sup_x_p", "max_sup_w_p", "z_final"};
  for (const auto& b : bounds) out.results.columns.push_back("exceeds_" + to_string(b.theorem));
  for (std::size_t k = 0; k < config.reps; ++k) {
    std::vector<std::string> row{std::to_string(k), std::to_string(replicate_seed(config.seed, k)),
                                 format_number(runs[k].max_sup), format_number(runs[k].max_sup_w),
                                 format_number(runs[k].final_z)};
    for (const auto& b : bounds) row.push_back(flag(runs[k].max_sup > b.threshold));
    out.results.add(std::move(row));
  }

  const double reps = static_cast<double>(config.reps);
  const double limit = 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / reps);
  json checks = json::array();
  bool all_pass = true;
  for (const auto& b : bounds) {
    const auto exceed = static_cast<std::size_t>(
        std::count_if(runs.begin(), runs.end(), [&](const RunOutcome& o) { return o.max_sup > b.threshold; }));
    const double freq = static_cast<double>(exceed) / reps;
    const bool eligible = b.valid && !b.vacuous && b.probability < 0.05;
    const bool pass = !eligible || freq <= limit;
    all_pass = all_pass && pass;
    checks.push_back({{"theorem", to_string(b.theorem)},
                      {"threshold", b.threshold},
                      {"probability", b.probability},
                      {"valid", b.valid},
                      {"vacuous", b.vacuous},
                      {"eligible", eligible},
                      {"exceedances", exceed},
                      {"frequency", freq},
                      {"limit", limit},
                      {"pass", pass}});
  }
  std::vector<double> maxima;
  for (const auto& o : runs) maxima.push_back(o.max_sup);
  out.summary = {{"n", n},
                 {"reps", config.reps},
                 {"continuous", config.continuous},
                 {"V", V},
                 {"mean_max_sup", mean_of(maxima)},
                 {"max_max_sup", maxima.empty() ? 0.0 : *std::max_element(maxima.begin(), maxima.end())},
                 {"checks", checks},
                 {"all_pass", all_pass}};
  json bj = json::array();
  for (const auto& b : bounds) bj.push_back(to_json(b));
  out.bounds = {{"constants", to_json(constants)}, {"psi", psi_value}, {"bounds", bj}, {"errors", bound_errors}};
  out.manifest = manifest_for("verify", config.seed, config.source);
  return out;
}

ExperimentResult run_convergence_study(const ExperimentConfig& config) {
  std::vector<std::size_t> ns = config.n_values;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  if (ns.size() < 2) throw Error("convergence study needs at least two distinct values of n");

  ExperimentResult out;
  out.kind = "convergence";
  out.results.columns = {"n", "rep", "seed", "max_sup_x_p", "max_sup_w_p"};
  json per_n = json::array();
  json bounds = json::array();
  std::vector<double> log_n, log_mean;
  for (std::size_t n : ns) {
    const Landscape landscape = make_landscape(config, n);
    const RateModel rates = make_rates(config, n);
    const Occupancy x0 = make_initial_state(config, n);
    const DiscrepancyScanner scanner(attribute_points(landscape), family_for(config, landscape));
    const std::uint64_t base = replicate_seed(config.seed, n);
    std::vector<RunOutcome> runs(config.reps);
    if (config.continuous) {
      const OdePath ode = integrate_ode(std::vector<double>(x0.begin(), x0.end()), landscape, rates, config.T,
                                        default_ode_step(landscape, rates));
      parallel_for(
          config.reps,
          [&](std::size_t k) {
            runs[k] = continuous_run(landscape, rates, config.T, ode, x0, replicate_seed(base, k), scanner,
                                     config.checkpoint_step);
          },
          config.workers);
    } else {
      parallel_for(
          config.reps,
          [&](std::size_t k) {
            runs[k] = discrete_run(landscape, rates, config.m, config.T, x0, replicate_seed(base, k), scanner);
          },
          config.workers);
    }
    std::vector<double> maxima;
    for (std::size_t k = 0; k < config.reps; ++k) {
      out.results.add({std::to_string(n), std::to_string(k), std::to_string(replicate_seed(base, k)),
                       format_number(runs[k].max_sup), format_number(runs[k].max_sup_w)});
      maxima.push_back(runs[k].max_sup);
    }
    const double mu = mean_of(maxima);
    per_n.push_back({{"n", n}, {"mean_max_sup", mu}, {"sd_max_sup", sd_of(maxima)}});
    bounds.push_back({{"n", n}, {"constants", to_json(bound_constants(landscape, rates))}});
    log_n.push_back(std::log(static_cast<double>(n)));
    log_mean.push_back(std::log(mu));
  }
  const bool finite = std::all_of(log_mean.begin(), log_mean.end(), [](double v) { return std::isfinite(v); });
  out.summary = {{"per_n", per_n},
                 {"reps", config.reps},
                 {"slope", finite ? json(fit_slope(log_n, log_mean)) : json(nullptr)}};
  out.bounds = {{"per_n", bounds}};
  out.manifest = manifest_for("convergence", config.seed, config.source);
  return out;
}

ExperimentResult run_bound_sweep(const ExperimentConfig& config) {
  const std::size_t n = config.n_values.at(0);
  const Landscape landscape = make_landscape(config, n);
  const RateModel rates = make_rates(config, n);
  const BoundConstants c = bound_constants(landscape, rates);
  const int V = family_for(config, landscape).vc_dimension();

  ExperimentResult out;
  out.kind = "bound-sweep";
  out.results.columns = {"theorem", "theta", "eta", "r", "alpha", "threshold", "probability", "valid", "vacuous"};
  auto add = [&](const TheoremBound& b) {
    out.results.add({to_string(b.theorem), format_number(b.inputs.theta), format_number(b.inputs.eta),
                     format_number(b.inputs.r), format_number(b.inputs.alpha), format_number(b.threshold),
                     format_number(b.probability), flag(b.valid), flag(b.vacuous)});
  };
  for (double theta : config.theta) {
    const double ps = psi(landscape, theta).value;
    for (double eta : config.eta) add(theorem1_bound(c, ps, config.m, config.T, V, theta, eta));
    for (double r : config.r) add(theorem2_bound(c, ps, config.m, config.T, V, theta, r));
    for (double eta : config.eta) {
      for (double r : config.r) {
        for (double alpha : config.alpha) {
          const auto b = theorem3_bound(c, ps, config.T, V, theta, eta, alpha, r);
          add(b.first);
          add(b.second);
        }
      }
    }
  }
  out.bounds = {{"constants", to_json(c)}};
  out.summary = {{"rows", out.results.rows.size()}};
  out.manifest = manifest_for("bound-sweep", config.seed, config.source);
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  switch (config.kind) {
    case ExperimentKind::Contact:
      return run_contact_experiment(config.n_values, config.lambda, config.reps, config.seed, config.workers);
    case ExperimentKind::Poisson: {
      PoissonSettings s;
      s.n = config.n_values.at(0);
      s.d = config.dimension;
      s.rd_values = config.rd_values;
      s.T = config.T;
      s.reps = config.reps;
      s.seed = config.seed;
      const RateFunction e = parse_rate(config.extinction);
      if (!std::holds_alternative<ConstantRate>(e)) throw Error("the Poisson experiment needs a constant extinction rate");
      s.extinction = std::get<ConstantRate>(e).value;
      s.initial = config.initial;
      s.theta = config.theta.front();
      s.eta = config.eta.front();
      s.alpha = config.alpha.front();
      s.r = config.r.front();
      s.workers = config.workers;
      auto out = run_poisson_experiment(s);
      out.manifest = manifest_for("poisson", config.seed, config.source);
      return out;
    }
    case ExperimentKind::Convergence:
      return run_convergence_study(config);
    case ExperimentKind::TheoremVerify:
      return run_theorem_verification(config);
    case ExperimentKind::BoundSweep:
      return run_bound_sweep(config);
  }
  throw Error("unknown experiment kind");
}

}  // namespace metapop
