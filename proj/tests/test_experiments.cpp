#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "metapop/continuous.hpp"
#include "metapop/error.hpp"
#include "metapop/experiments.hpp"

using namespace metapop;

namespace {

ExperimentConfig config_from(const std::string& text) {
  std::istringstream in(text);
  return ExperimentConfig::from(KeyValues::parse(in));
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("slope and median helpers") {
  CHECK(fit_slope({1, 2, 3}, {2, 4, 6}) == doctest::Approx(2.0));
  CHECK(fit_slope({0, 1}, {5, 5}) == 0.0);
  CHECK_THROWS_AS(fit_slope({1}, {1}), Error);
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK_THROWS_AS(median({}), Error);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 2.5e-300, 123456789.0, -0.0078125}) CHECK(std::strtod(format_number(v).c_str(), nullptr) == v);
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(std::nan("")) == "nan");
}

TEST_CASE("config parsing") {
  const auto c = config_from(
      "experiment = convergence\n"
      "landscape = equal\n"
      "n = 100, 400\n"
      "time = continuous\n"
      "family = halflines\n"
      "theta = 1, 2\n"
      "reps = 7\n"
      "seed = 99\n");
  CHECK(c.kind == ExperimentKind::Convergence);
  CHECK(c.n_values == std::vector<std::size_t>{100, 400});
  CHECK(c.continuous);
  CHECK(c.family.kind == FamilyKind::HalfLines);
  CHECK(c.theta.size() == 2);
  CHECK(c.reps == 7);
  CHECK(c.seed == 99);
  CHECK_THROWS_AS(config_from("experiment = tarot\n"), Error);
  CHECK_THROWS_AS(config_from("time = sideways\n"), Error);
  CHECK_THROWS_AS(config_from("initial = 0\n"), Error);
  CHECK(parse_experiment_kind("theorem-verify") == ExperimentKind::TheoremVerify);
  CHECK(parse_experiment_kind("sweep") == ExperimentKind::BoundSweep);
}

TEST_CASE("contact ring connectivity is the neighbour count") {
  const auto ring = contact_ring_landscape(7);
  const Occupancy x{1, 0, 1, 1, 0, 0, 1};
  const auto s = ring.connectivity(x);
  for (std::size_t i = 0; i < 7; ++i) CHECK(s[i] == doctest::Approx(x[(i + 6) % 7] + x[(i + 1) % 7]));
  CHECK_THROWS_AS(contact_ring_landscape(2), Error);
}

TEST_CASE("contact ODE: persistence above the threshold, extinction below") {
  const auto ring = contact_ring_landscape(20);
  const std::vector<double> ones(20, 1.0);
  const auto high = integrate_ode(ones, ring, RateModel::uniform(20, LinearRate{1.0}, ConstantRate{1.0}), 50.0, 0.01);
  for (double v : high.at(50.0)) CHECK(std::abs(v - 0.5) < 1e-6);
  const auto low = integrate_ode(ones, ring, RateModel::uniform(20, LinearRate{0.25}, ConstantRate{1.0}), 50.0, 0.01);
  for (double v : low.at(50.0)) CHECK(v < 1e-6);
}

TEST_CASE("contact experiment summary") {
  const auto r = run_contact_experiment({20, 40}, 1.0, 10, 3, 1);
  REQUIRE(r.summary["per_n"].size() == 2);
  for (const auto& entry : r.summary["per_n"]) {
    CHECK(entry["ode_terminal_min"].get<double>() == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(entry["ode_terminal_max"].get<double>() == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(entry["censored"].get<int>() == 0);
  }
  CHECK(r.results.rows.size() == 20);
  CHECK(r.summary["slope_log_median_vs_log_log_n"].is_number());
  CHECK(r.tables.count("trajectory") == 1);
}

TEST_CASE("poisson neighbour counts follow the ball volume") {
  const std::size_t n = 2000;
  const double rd = 200.0;
  const double expected = unit_ball_volume(2) * rd;
  int within = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto l = generate_landscape(UniformBoxLayout{n, 2, seed}, TopHatKernel{std::sqrt(rd)});
    std::size_t most = 0;
    for (std::size_t i = 0; i < n; ++i) most = std::max(most, l.degree(i) + 1);  // the ball holds z_i itself
    if (double(most) >= 0.7 * expected && double(most) <= 1.3 * expected) ++within;
  }
  CHECK(within >= 9);
}

TEST_CASE("a radius beyond the box diagonal gives the equal-patch kernel") {
  const std::size_t n = 30;
  const auto l = generate_landscape(UniformBoxLayout{n, 2, 1}, TopHatKernel{100.0});
  const double height = l.kernel(0, 1);
  CHECK(height > 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) CHECK(l.kernel(i, j) == (i == j ? 0.0 : height));
  }
}

TEST_CASE("verification with constant rates reduces to the W-vs-p discrepancy") {
  const auto c = config_from(
      "experiment = verify\nlandscape = equal\nn = 60\ncolonisation = const(0.3)\nextinction = const(0.5)\n"
      "m = 1\nT = 5\nreps = 20\nseed = 4\n");
  const auto r = run_theorem_verification(c);
  for (const auto& row : r.results.rows) CHECK(row[2] == row[3]);
  CHECK(r.bounds["errors"].size() == 1);
  CHECK(r.summary["all_pass"].get<bool>());
}

TEST_CASE("vacuous bounds are excluded from the exceedance check") {
  const auto c = config_from("experiment = verify\nlandscape = equal\nn = 50\nm = 1\nT = 2\nreps = 20\nseed = 2\n");
  const auto r = run_theorem_verification(c);
  bool saw_vacuous = false;
  for (const auto& check : r.summary["checks"]) {
    if (check["vacuous"].get<bool>()) {
      saw_vacuous = true;
      CHECK_FALSE(check["eligible"].get<bool>());
      CHECK(check["pass"].get<bool>());
    }
  }
  CHECK(saw_vacuous);
}

TEST_CASE("convergence study on equal patches") {
  const auto c = config_from(
      "experiment = convergence\nlandscape = equal\nn = 100, 400, 1600\nm = 1\nT = 2\nreps = 30\nseed = 8\n");
  const auto r = run_convergence_study(c);
  const double slope = r.summary["slope"].get<double>();
  CHECK(slope >= -0.65);
  CHECK(slope <= -0.35);
  CHECK_THROWS_AS(run_convergence_study(config_from("experiment = convergence\nn = 100\n")), Error);
}

TEST_CASE("bound sweep covers the grid") {
  const auto c = config_from(
      "experiment = sweep\nlandscape = equal\nn = 500\ntheta = 0.5, 1\neta = 0.2, 0.3\nr = 3\nalpha = 0.1\n");
  const auto r = run_bound_sweep(c);
  CHECK(r.results.rows.size() >= 4);
}

TEST_CASE("identical configs give byte-identical outputs") {
  namespace fs = std::filesystem;
  const std::string text = "experiment = verify\nlandscape = poisson\nrd = 20\ndimension = 2\nn = 80\n"
                           "m = 2\nT = 1\nreps = 6\nseed = 12\nworkers = 2\n";
  const auto base = fs::temp_directory_path() / "metapop_repro";
  fs::remove_all(base);
  for (const char* run : {"a", "b"}) write_outputs(run_experiment(config_from(text)), (base / run).string());
  for (const char* file : {"results.csv", "bounds.json", "summary.json", "manifest.json"}) {
    const auto a = slurp(base / "a" / file);
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(base / "b" / file));
  }
  const auto manifest = nlohmann::json::parse(slurp(base / "a" / "manifest.json"));
  CHECK(manifest["version"] == version);
  CHECK(manifest["seed"] == 12);
  CHECK(manifest["config_hash"].get<std::string>().size() == 16);

  auto serial = config_from(text);
  serial.workers = 1;
  CHECK(run_experiment(serial).results.csv() == run_experiment(config_from(text)).results.csv());
  fs::remove_all(base);
}
