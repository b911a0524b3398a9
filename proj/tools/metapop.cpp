#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "metapop/bounds.hpp"
#include "metapop/config.hpp"
#include "metapop/continuous.hpp"
#include "metapop/discrete.hpp"
#include "metapop/error.hpp"
#include "metapop/experiments.hpp"
#include "metapop/landscape.hpp"
#include "metapop/measures.hpp"
#include "metapop/oracle.hpp"
#include "metapop/random.hpp"
#include "metapop/rates.hpp"

namespace fs = std::filesystem;
using namespace metapop;

namespace {

struct ModelArgs {
  std::string landscape;
  std::string rates;
  std::string x0;
  double initial = 1.0;
  std::uint64_t seed = 1;
};

void add_model_options(CLI::App* cmd, ModelArgs& a) {
  cmd->add_option("--landscape", a.landscape, "Landscape file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--rates", a.rates, "Rate configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--x0", a.x0, "Initial occupancy, e.g. 1,0,1 (default: all occupied)");
  cmd->add_option("--initial", a.initial, "Initial occupancy probability when --x0 is absent")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--seed", a.seed, "Base seed");
}

Occupancy initial_state(const ModelArgs& a, std::size_t n) {
  if (!a.x0.empty()) {
    Occupancy x;
    std::string s = a.x0;
    for (char& c : s) {
      if (c == ',') c = ' ';
    }
    std::istringstream in(s);
    int v;
    while (in >> v) {
      if (v != 0 && v != 1) throw Error("--x0 entries must be 0 or 1");
      x.push_back(static_cast<std::uint8_t>(v));
    }
    if (x.size() != n) throw Error("--x0 has " + std::to_string(x.size()) + " entries, the landscape has " + std::to_string(n));
    return x;
  }
  ExperimentConfig c;
  c.initial = a.initial;
  c.seed = a.seed;
  if (a.initial <= 0.0) return Occupancy(n, 0);
  return make_initial_state(c, n);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string num(double v) { return format_number(v); }

void write_wide_header(std::ostream& out, const char* first, const char* prefix, std::size_t n) {
  out << first;
  for (std::size_t i = 1; i <= n; ++i) out << ',' << prefix << i;
  out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic metapopulation simulation and approximation bounds"};
  app.require_subcommand(1);

  // landscape gen
  auto* land = app.add_subcommand("landscape", "Landscape utilities");
  land->require_subcommand(1);
  auto* gen = land->add_subcommand("gen", "Generate a landscape file");
  std::string kind = "uniform", kernel_text = "exponential:1", out_file;
  std::size_t gen_n = 10;
  int gen_d = 2;
  std::uint64_t gen_seed = 1;
  gen->add_option("--kind", kind, "uniform | ring | grid")->check(CLI::IsMember({"uniform", "ring", "grid"}));
  gen->add_option("--n", gen_n, "Number of patches")->required();
  gen->add_option("--d", gen_d, "Spatial dimension");
  gen->add_option("--seed", gen_seed, "Seed for uniform layouts");
  gen->add_option("--kernel", kernel_text, "exponential:<alpha> | tophat:<R> | ring");
  gen->add_option("-o,--output", out_file, "Output file (default: stdout)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run simulators");
  sim->require_subcommand(1);
  ModelArgs model;
  double m = 1.0, T = 1.0, h = 0.0;
  std::size_t reps = 1;
  bool coupled = false;
  std::string out_dir = ".";
  auto* sim_discrete = sim->add_subcommand("discrete", "Discrete-time incidence function chain");
  add_model_options(sim_discrete, model);
  sim_discrete->add_option("--m", m, "Steps per unit time");
  sim_discrete->add_option("--T", T, "Horizon");
  sim_discrete->add_option("--reps", reps, "Replicates");
  sim_discrete->add_flag("--coupled", coupled, "Also run W, p and J and write coupling diagnostics");
  sim_discrete->add_option("-o,--output", out_dir, "Output directory");
  std::vector<CLI::App*> ct_cmds;
  for (const char* name : {"ctmc", "ode", "coupled-ct"}) {
    auto* c = sim->add_subcommand(name, std::string("Continuous time: ") + name);
    c->set_help_flag("--help", "Print this help message and exit");
    add_model_options(c, model);
    c->add_option("--T", T, "Horizon");
    c->add_option("--h", h, "ODE step (default min(0.01, 1/(10k)))");
    c->add_option("--reps", reps, "Replicates");
    c->add_option("-o,--output", out_dir, "Output directory");
    ct_cmds.push_back(c);
  }

  // bounds
  auto* bnd = app.add_subcommand("bounds", "Evaluate the approximation bounds");
  std::string b_land, b_rates;
  int theorem = 1, V = -1;
  double theta = 1.0, eta = 0.25, r = 2.0, alpha = 0.1;
  bool as_json = false;
  bnd->add_option("--landscape", b_land, "Landscape file")->required()->check(CLI::ExistingFile);
  bnd->add_option("--rates", b_rates, "Rate configuration file")->required()->check(CLI::ExistingFile);
  bnd->add_option("--theorem", theorem, "1, 2 or 3")->check(CLI::IsMember({1, 2, 3}));
  bnd->add_option("--T", T, "Horizon");
  bnd->add_option("--m", m, "Steps per unit time");
  bnd->add_option("--V", V, "VC dimension (default: rectangles over location x weight)");
  bnd->add_option("--theta", theta, "theta");
  bnd->add_option("--eta", eta, "eta");
  bnd->add_option("--r", r, "r");
  bnd->add_option("--alpha", alpha, "alpha");
  bnd->add_flag("--json", as_json, "Print a JSON report");

  // oracle
  auto* orc = app.add_subcommand("oracle", "Exact small-instance distributions");
  orc->require_subcommand(1);
  std::vector<CLI::App*> orc_cmds;
  bool exact = false;
  for (const char* name : {"chain", "coupled", "ctmc"}) {
    auto* c = orc->add_subcommand(name, std::string("Exact ") + name + " law");
    add_model_options(c, model);
    c->add_option("--m", m, "Steps per unit time");
    c->add_option("--T", T, "Horizon");
    c->add_flag("--exact", exact, "Exact computation (the only mode)");
    orc_cmds.push_back(c);
  }

  // experiment
  auto* exp = app.add_subcommand("experiment", "Config-driven experiments");
  exp->require_subcommand(1);
  std::string config_file;
  std::string exp_dir = "results";
  std::vector<CLI::App*> exp_cmds;
  for (const char* name : {"contact", "poisson", "convergence", "verify", "sweep"}) {
    auto* c = exp->add_subcommand(name, std::string("Run the ") + name + " experiment");
    c->add_option("--config", config_file, "Key/value configuration file")->required()->check(CLI::ExistingFile);
    c->add_option("-o,--output", exp_dir, "Output directory");
    exp_cmds.push_back(c);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const KernelSpec kernel = parse_kernel(kernel_text);
      LayoutSpec layout;
      if (kind == "uniform") {
        layout = UniformBoxLayout{gen_n, gen_d, gen_seed};
      } else if (kind == "grid") {
        layout = GridLayout{gen_n, gen_d};
      } else {
        layout = RingLayout{gen_n};
      }
      const Landscape l = generate_landscape(layout, kernel);
      if (out_file.empty()) {
        write_landscape(std::cout, l);
      } else {
        auto out = open_out(out_file);
        write_landscape(out, l);
      }
      return 0;
    }

    if (sim_discrete->parsed()) {
      const Landscape l = load_landscape(model.landscape);
      const std::size_t n = l.size();
      const RateModel rates = load_rate_config(model.rates, n);
      const Occupancy x0 = initial_state(model, n);
      fs::create_directories(out_dir);
      const DiscrepancyScanner scanner(attribute_points(l), VCFamily{FamilyKind::Rectangles, l.dimension() + 1});
      for (std::size_t k = 0; k < reps; ++k) {
        const std::uint64_t seed = replicate_seed(model.seed, k);
        const fs::path base = fs::path(out_dir) / ("rep_" + std::to_string(k));
        if (!coupled) {
          const auto path = simulate_ifm(x0, l, rates, m, T, seed);
          auto out = open_out(base.string() + ".csv");
          write_wide_header(out, "t", "X_", n);
          for (std::size_t t = 0; t < path.rows(); ++t) {
            out << t;
            for (auto v : path.row(t)) out << ',' << int(v);
            out << '\n';
          }
          continue;
        }
        const auto traj = simulate_coupled(x0, l, rates, m, T, seed);
        auto xs = open_out(base.string() + ".csv");
        auto cs = open_out(base.string() + "_coupled.csv");
        auto ds = open_out(base.string() + "_discrepancy.csv");
        write_wide_header(xs, "t", "X_", n);
        cs << "t,sumJ_weighted,l1_XW,tv_Xp,sup_rect_Xp\n";
        ds << "t,family,sup,exact_flag,witness_params,tv\n";
        const auto z = traj.weighted_disagreement(l.weights());
        std::vector<double> diff(n);
        for (std::size_t t = 0; t <= traj.steps(); ++t) {
          xs << t;
          for (auto v : traj.x.row(t)) xs << ',' << int(v);
          xs << '\n';
          double l1 = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            l1 += traj.x(t, i) != traj.w(t, i);
            diff[i] = traj.x(t, i) - traj.p(t, i);
          }
          const auto report = scanner.scan(diff);
          const double tv = tv_distance(traj.x.row(t), traj.p.row(t));
          cs << t << ',' << num(z[t]) << ',' << num(l1 / static_cast<double>(n)) << ',' << num(tv) << ','
             << num(report.sup) << '\n';
          ds << t << ',' << to_string(report.kind) << ',' << num(report.sup) << ','
             << (report.exact ? "exact" : "lower-bound") << ",\"" << describe(report.witness) << "\"," << num(tv) << '\n';
        }
      }
      return 0;
    }

    for (std::size_t c = 0; c < ct_cmds.size(); ++c) {
      if (!ct_cmds[c]->parsed()) continue;
      const Landscape l = load_landscape(model.landscape);
      const std::size_t n = l.size();
      const RateModel rates = load_rate_config(model.rates, n);
      const Occupancy x0 = initial_state(model, n);
      fs::create_directories(out_dir);
      const double step = h > 0.0 ? h : default_ode_step(l, rates);
      if (c == 1) {
        const OdePath ode = integrate_ode(std::vector<double>(x0.begin(), x0.end()), l, rates, T, step);
        auto out = open_out(fs::path(out_dir) / "ode.csv");
        write_wide_header(out, "t", "p_", n);
        for (std::size_t k = 0; k < ode.grid_points(); ++k) {
          out << num(ode.time(k));
          for (double v : ode.at_grid(k)) out << ',' << num(v);
          out << '\n';
        }
        return 0;
      }
      std::optional<OdePath> ode;
      if (c == 2) ode = integrate_ode(std::vector<double>(x0.begin(), x0.end()), l, rates, T, step);
      for (std::size_t k = 0; k < reps; ++k) {
        const std::uint64_t seed = replicate_seed(model.seed, k);
        auto out = open_out(fs::path(out_dir) / ("events_" + std::to_string(k) + ".csv"));
        if (c == 0) {
          const EventPath path = simulate_ctmc(x0, l, rates, T, seed);
          out << "time,patch,new_value\n";
          for (const auto& e : path.events) out << num(e.time) << ',' << e.patch + 1 << ',' << int(e.value) << '\n';
        } else {
          const auto traj = simulate_coupled_ct(x0, l, rates, T, seed, *ode);
          out << "time,patch,w,x,sumJ_weighted\n";
          for (const auto& e : traj.events) {
            out << num(e.time) << ',' << e.patch + 1 << ',' << int(e.w) << ',' << int(e.x) << ',' << num(e.z) << '\n';
          }
        }
      }
      return 0;
    }

    if (bnd->parsed()) {
      const Landscape l = load_landscape(b_land);
      const RateModel rates = load_rate_config(b_rates, l.size());
      const BoundConstants c = bound_constants(l, rates);
      const int vc = V >= 0 ? V : 2 * (l.dimension() + 1);
      const double ps = psi(l, theta).value;
      std::vector<TheoremBound> out;
      if (theorem == 1) out.push_back(theorem1_bound(c, ps, m, T, vc, theta, eta));
      if (theorem == 2) out.push_back(theorem2_bound(c, ps, m, T, vc, theta, r));
      if (theorem == 3) {
        const auto b = theorem3_bound(c, ps, T, vc, theta, eta, alpha, r);
        out.push_back(b.first);
        out.push_back(b.second);
      }
      if (as_json) {
        nlohmann::json j = {{"constants", to_json(c)}, {"psi", ps}, {"bounds", nlohmann::json::array()}};
        for (const auto& b : out) j["bounds"].push_back(to_json(b));
        std::cout << j.dump(2) << '\n';
      } else {
        std::cout << "A = " << num(c.A) << "  H = " << num(c.H) << "  A2 = " << num(c.A2) << "  H2 = " << num(c.H2)
                  << "  a_bar = " << num(c.a_bar) << "  k = " << num(c.k) << "  psi = " << num(ps) << '\n';
        for (const auto& b : out) {
          std::cout << to_string(b.theorem) << ": threshold " << num(b.threshold) << ", probability "
                    << num(b.probability) << (b.valid ? "" : " [preconditions fail]") << (b.vacuous ? " [vacuous]" : "")
                    << '\n';
          for (const auto& d : b.diagnostics) {
            std::cout << "  " << (d.satisfied ? "ok   " : "FAIL ") << d.name << " (" << d.detail << ")\n";
          }
        }
      }
      return 0;
    }

    for (std::size_t c = 0; c < orc_cmds.size(); ++c) {
      if (!orc_cmds[c]->parsed()) continue;
      const Landscape l = load_landscape(model.landscape);
      const RateModel rates = load_rate_config(model.rates, l.size());
      const Occupancy x0 = initial_state(model, l.size());
      std::cout.precision(17);
      if (c == 1) {
        const auto mom = exact_coupled_moment(x0, l, rates, m, T);
        std::cout << "E[Z]," << num(mom.mean_z) << "\nVar[Z]," << num(mom.var_z) << '\n';
        for (std::size_t i = 0; i < mom.mean_j.size(); ++i) std::cout << "E[J_" << i + 1 << "]," << num(mom.mean_j[i]) << '\n';
        return 0;
      }
      const ExactDistribution dist =
          c == 0 ? exact_chain_distribution(x0, l, rates, m, T) : exact_ctmc_marginal(x0, l, rates, T);
      std::cout << "state,probability\n";
      for (std::size_t s = 0; s < dist.states(); ++s) {
        const auto st = dist.state(s);
        for (auto v : st) std::cout << int(v);
        std::cout << ',' << num(dist.probability[s]) << '\n';
      }
      return 0;
    }

    for (auto* c : exp_cmds) {
      if (!c->parsed()) continue;
      KeyValues kv = KeyValues::load(config_file);
      kv.set("experiment", c->get_name() == "sweep" ? "bound-sweep" : c->get_name());
      const ExperimentConfig config = ExperimentConfig::from(kv);
      const ExperimentResult result = run_experiment(config);
      write_outputs(result, exp_dir);
      std::cout << result.summary.dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
