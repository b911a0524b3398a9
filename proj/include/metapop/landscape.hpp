#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace metapop {

/// A habitat patch: a location in R^d and a positive weight (size).
struct Patch {
  std::vector<double> z;
  double a = 1.0;
};

struct ExponentialKernel {
  double alpha = 1.0;
};

/// s_ij = (v(d) R^d)^{-1} 1[|z_i - z_j| <= R], v(d) the unit-ball volume.
struct TopHatKernel {
  double radius = 1.0;
};

/// Nearest neighbours on a cycle: s_ij = 1 iff |i - j| = 1 or {i, j} = {1, n}.
struct RingKernel {};

/// Row-major n x n matrix supplied by the caller.
struct ExplicitKernel {
  std::vector<double> matrix;
};

using KernelSpec = std::variant<ExponentialKernel, TopHatKernel, RingKernel, ExplicitKernel>;

/// Volume of the unit ball in R^d.
double unit_ball_volume(int d);

/// Euclidean distance between two locations of equal dimension.
double distance(std::span<const double> u, std::span<const double> v);

/// Patch network with a dense symmetric interaction kernel. Immutable after
/// construction and safe to share between threads.
class Landscape {
 public:
  /// Validates the patches and builds the kernel matrix. Throws Error on
  /// dimension mismatch, non-positive weights or kernel parameters, and on
  /// explicit matrices that are asymmetric, negative or have a nonzero diagonal.
  static Landscape build(std::vector<Patch> patches, const KernelSpec& kernel);

  std::size_t size() const noexcept { return patches_.size(); }
  int dimension() const noexcept { return dimension_; }
  const std::vector<Patch>& patches() const noexcept { return patches_; }
  const Patch& patch(std::size_t i) const { return patches_.at(i); }
  std::span<const double> weights() const noexcept { return weights_; }
  const KernelSpec& kernel_spec() const noexcept { return kernel_; }

  double kernel(std::size_t i, std::size_t j) const noexcept { return s_[i * size() + j]; }
  std::span<const double> kernel_row(std::size_t i) const noexcept {
    return {s_.data() + i * size(), size()};
  }

  /// S_i(x) = n^{-1} sum_{j != i} x_j a_j s_ji. Accepts occupancy states and
  /// probability vectors; throws on length mismatch or entries outside [0, 1].
  std::vector<double> connectivity(std::span<const double> x) const;
  std::vector<double> connectivity(std::span<const std::uint8_t> x) const;

  /// Unchecked fast path used inside the simulators.
  void connectivity_into(std::span<const double> x, std::span<double> out) const noexcept;
  void connectivity_into(std::span<const std::uint8_t> x, std::span<double> out) const noexcept;

  /// Attainable connectivity ceiling S_i(1) = n^{-1} sum_j a_j s_ji.
  const std::vector<double>& max_connectivity() const noexcept { return s_max_; }

  /// Nonzero influence coefficients a_j s_ji / n of patch j on its neighbours i,
  /// in compressed sparse row form keyed by the source patch j.
  struct Influence {
    std::size_t target;
    double coefficient;
  };
  std::span<const Influence> influence_of(std::size_t j) const noexcept {
    return {influence_.data() + offsets_[j], offsets_[j + 1] - offsets_[j]};
  }

  /// Number of patches i != j with s_ij > 0.
  std::size_t degree(std::size_t i) const noexcept { return offsets_[i + 1] - offsets_[i]; }

  /// Landscape with weights c a_j and kernel s_ji / c (identical products a_j s_ji).
  Landscape rescaled(double c) const;

 private:
  Landscape() = default;
  void finalize();

  std::vector<Patch> patches_;
  std::vector<double> weights_;
  std::vector<double> s_;
  std::vector<double> s_max_;
  std::vector<std::size_t> offsets_;
  std::vector<Influence> influence_;
  KernelSpec kernel_;
  int dimension_ = 1;
};

struct UniformBoxLayout {
  std::size_t n = 1;
  int d = 1;
  std::uint64_t seed = 0;
};
struct GridLayout {
  std::size_t n = 1;
  int d = 1;
};
struct RingLayout {
  std::size_t n = 1;
};
using LayoutSpec = std::variant<UniformBoxLayout, GridLayout, RingLayout>;

/// UniformBox: z_i iid uniform on [0, n^{1/d}]^d with a_i = n. Grid: the first n
/// points of the integer lattice {0..k-1}^d with k = ceil(n^{1/d}), a_i = 1.
/// Ring: z_i = i in one dimension with a_i = 1.
Landscape generate_landscape(const LayoutSpec& layout, const KernelSpec& kernel);

/// Text format: header `d n`, n lines `z_1 .. z_d a`, optional kernel block.
void write_landscape(std::ostream& out, const Landscape& landscape);
Landscape read_landscape(std::istream& in);
Landscape load_landscape(const std::string& path);

/// Parses `exponential:<alpha>`, `tophat:<R>` or `ring`.
KernelSpec parse_kernel(const std::string& text);

}  // namespace metapop
