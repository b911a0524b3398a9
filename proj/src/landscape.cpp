#include "metapop/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "metapop/error.hpp"
#include "metapop/random.hpp"

namespace metapop {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::vector<double> build_matrix(const std::vector<Patch>& patches, int d, const KernelSpec& kernel) {
  const std::size_t n = patches.size();
  std::vector<double> s(n * n, 0.0);
  auto fill_pairs = [&](auto&& entry) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = entry(i, j);
        s[i * n + j] = v;
        s[j * n + i] = v;
      }
    }
  };
  std::visit(
      overloaded{
          [&](const ExponentialKernel& k) {
            if (!(k.alpha > 0.0)) throw Error("exponential kernel requires alpha > 0");
            fill_pairs([&](std::size_t i, std::size_t j) {
              return std::exp(-k.alpha * distance(patches[i].z, patches[j].z));
            });
          },
          [&](const TopHatKernel& k) {
            if (!(k.radius > 0.0)) throw Error("top-hat kernel requires R > 0");
            const double height = 1.0 / (unit_ball_volume(d) * std::pow(k.radius, d));
            fill_pairs([&](std::size_t i, std::size_t j) {
              return distance(patches[i].z, patches[j].z) <= k.radius ? height : 0.0;
            });
          },
          [&](const RingKernel&) {
            fill_pairs([&](std::size_t i, std::size_t j) {
              return (j - i == 1 || (i == 0 && j == n - 1)) ? 1.0 : 0.0;
            });
          },
          [&](const ExplicitKernel& k) {
            if (k.matrix.size() != n * n) throw Error("explicit kernel must be n x n");
            for (std::size_t i = 0; i < n; ++i) {
              if (k.matrix[i * n + i] != 0.0) throw Error("explicit kernel has a nonzero diagonal");
              for (std::size_t j = 0; j < n; ++j) {
                const double v = k.matrix[i * n + j];
                if (!(v >= 0.0) || !std::isfinite(v)) throw Error("explicit kernel has a negative entry");
                if (v != k.matrix[j * n + i]) throw Error("explicit kernel is not symmetric");
              }
            }
            s = k.matrix;
          },
      },
      kernel);
  return s;
}

}  // namespace

double unit_ball_volume(int d) {
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

double distance(std::span<const double> u, std::span<const double> v) {
  double acc = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double diff = u[k] - v[k];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

Landscape Landscape::build(std::vector<Patch> patches, const KernelSpec& kernel) {
  if (patches.empty()) throw Error("landscape needs at least one patch");
  const std::size_t d = patches.front().z.size();
  if (d == 0) throw Error("patch locations must have dimension >= 1");
  for (const auto& p : patches) {
    if (p.z.size() != d) throw Error("patch dimension mismatch");
    if (!(p.a > 0.0) || !std::isfinite(p.a)) throw Error("patch weights must be positive");
  }
  Landscape out;
  out.dimension_ = static_cast<int>(d);
  out.s_ = build_matrix(patches, out.dimension_, kernel);
  out.patches_ = std::move(patches);
  out.kernel_ = kernel;
  out.finalize();
  return out;
}

void Landscape::finalize() {
  const std::size_t n = patches_.size();
  weights_.resize(n);
  for (std::size_t i = 0; i < n; ++i) weights_[i] = patches_[i].a;

  const double inv_n = 1.0 / static_cast<double>(n);
  offsets_.assign(n + 1, 0);
  influence_.clear();
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double sji = s_[j * n + i];
      if (i != j && sji > 0.0) influence_.push_back({i, weights_[j] * sji * inv_n});
    }
    offsets_[j + 1] = influence_.size();
  }
  s_max_.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (const auto& [i, c] : influence_of(j)) s_max_[i] += c;
  }
}

void Landscape::connectivity_into(std::span<const double> x, std::span<double> out) const noexcept {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < size(); ++j) {
    const double xj = x[j];
    if (xj == 0.0) continue;
    for (const auto& [i, c] : influence_of(j)) out[i] += xj * c;
  }
}

void Landscape::connectivity_into(std::span<const std::uint8_t> x, std::span<double> out) const noexcept {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < size(); ++j) {
    if (!x[j]) continue;
    for (const auto& [i, c] : influence_of(j)) out[i] += c;
  }
}

std::vector<double> Landscape::connectivity(std::span<const double> x) const {
  if (x.size() != size()) throw Error("connectivity: state length does not match landscape");
  for (double v : x) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error("connectivity: entries must lie in [0, 1]");
  }
  std::vector<double> out(size());
  connectivity_into(x, out);
  return out;
}

std::vector<double> Landscape::connectivity(std::span<const std::uint8_t> x) const {
  if (x.size() != size()) throw Error("connectivity: state length does not match landscape");
  for (auto v : x) {
    if (v > 1) throw Error("connectivity: occupancy entries must be 0 or 1");
  }
  std::vector<double> out(size());
  connectivity_into(x, out);
  return out;
}

Landscape Landscape::rescaled(double c) const {
  if (!(c > 0.0)) throw Error("rescale factor must be positive");
  auto patches = patches_;
  for (auto& p : patches) p.a *= c;
  ExplicitKernel k{s_};
  for (auto& v : k.matrix) v /= c;
  return build(std::move(patches), k);
}

Landscape generate_landscape(const LayoutSpec& layout, const KernelSpec& kernel) {
  std::vector<Patch> patches;
  std::visit(
      overloaded{
          [&](const UniformBoxLayout& box) {
            if (box.n < 1 || box.d < 1) throw Error("uniform layout requires n >= 1 and d >= 1");
            const double side = std::pow(static_cast<double>(box.n), 1.0 / box.d);
            RandomStream rng(box.seed);
            patches.resize(box.n);
            for (auto& p : patches) {
              p.z.resize(box.d);
              for (auto& c : p.z) c = side * rng.uniform();
              p.a = static_cast<double>(box.n);
            }
          },
          [&](const GridLayout& grid) {
            if (grid.n < 1 || grid.d < 1) throw Error("grid layout requires n >= 1 and d >= 1");
            std::size_t side = 1;
            auto capacity = [&](std::size_t k) {
              std::size_t c = 1;
              for (int i = 0; i < grid.d; ++i) c *= k;
              return c;
            };
            while (capacity(side) < grid.n) ++side;
            patches.resize(grid.n);
            for (std::size_t i = 0; i < grid.n; ++i) {
              patches[i].z.resize(grid.d);
              std::size_t rest = i;
              for (int k = 0; k < grid.d; ++k) {
                patches[i].z[k] = static_cast<double>(rest % side);
                rest /= side;
              }
              patches[i].a = 1.0;
            }
          },
          [&](const RingLayout& ring) {
            if (ring.n < 1) throw Error("ring layout requires n >= 1");
            patches.resize(ring.n);
            for (std::size_t i = 0; i < ring.n; ++i) patches[i] = Patch{{static_cast<double>(i + 1)}, 1.0};
          },
      },
      layout);
  return Landscape::build(std::move(patches), kernel);
}

void write_landscape(std::ostream& out, const Landscape& landscape) {
  const std::size_t n = landscape.size();
  out.precision(17);
  out << landscape.dimension() << ' ' << n << '\n';
  for (const auto& p : landscape.patches()) {
    for (double c : p.z) out << c << ' ';
    out << p.a << '\n';
  }
  std::visit(overloaded{
                 [&](const ExponentialKernel& k) { out << "kernel exponential " << k.alpha << '\n'; },
                 [&](const TopHatKernel& k) { out << "kernel tophat " << k.radius << '\n'; },
                 [&](const RingKernel&) { out << "kernel ring\n"; },
                 [&](const ExplicitKernel& k) {
                   out << "kernel matrix\n";
                   for (std::size_t i = 0; i < n; ++i) {
                     for (std::size_t j = 0; j < n; ++j) out << k.matrix[i * n + j] << (j + 1 < n ? ' ' : '\n');
                   }
                 },
             },
             landscape.kernel_spec());
}

Landscape read_landscape(std::istream& in) {
  int d = 0;
  std::size_t n = 0;
  if (!(in >> d >> n) || d < 1 || n < 1) throw Error("landscape file: bad header, expected `d n`");
  std::vector<Patch> patches(n);
  for (auto& p : patches) {
    p.z.resize(d);
    for (auto& c : p.z) {
      if (!(in >> c)) throw Error("landscape file: truncated patch table");
    }
    if (!(in >> p.a)) throw Error("landscape file: truncated patch table");
  }
  KernelSpec kernel = ExponentialKernel{1.0};
  std::string word;
  if (in >> word) {
    if (word != "kernel") throw Error("landscape file: expected `kernel` block, got " + word);
    std::string kind;
    in >> kind;
    if (kind == "exponential") {
      double alpha = 0;
      in >> alpha;
      kernel = ExponentialKernel{alpha};
    } else if (kind == "tophat") {
      double r = 0;
      in >> r;
      kernel = TopHatKernel{r};
    } else if (kind == "ring") {
      kernel = RingKernel{};
    } else if (kind == "matrix") {
      ExplicitKernel k;
      k.matrix.resize(n * n);
      for (auto& v : k.matrix) {
        if (!(in >> v)) throw Error("landscape file: truncated kernel matrix");
      }
      kernel = std::move(k);
    } else {
      throw Error("landscape file: unknown kernel kind " + kind);
    }
    if (in.fail()) throw Error("landscape file: bad kernel parameter");
  }
  return Landscape::build(std::move(patches), kernel);
}

Landscape load_landscape(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open landscape file " + path);
  return read_landscape(in);
}

KernelSpec parse_kernel(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  auto param = [&] {
    if (colon == std::string::npos) throw Error("kernel " + kind + " needs a parameter, e.g. " + kind + ":1.0");
    return std::stod(text.substr(colon + 1));
  };
  if (kind == "exponential" || kind == "exp") return ExponentialKernel{param()};
  if (kind == "tophat") return TopHatKernel{param()};
  if (kind == "ring") return RingKernel{};
  throw Error("unknown kernel spec: " + text);
}

}  // namespace metapop
