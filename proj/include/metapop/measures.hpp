#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "metapop/landscape.hpp"

namespace metapop {

/// Set families over the patch attribute space (location x weight).
enum class FamilyKind { Rectangles, Balls, HalfLines };

/// A family of sets in R^dim. HalfLines are lower orthants
/// {w : w_k <= c_k for all k}, which reduce to half-lines when dim = 1.
struct VCFamily {
  FamilyKind kind = FamilyKind::Rectangles;
  int dim = 2;

  /// Rectangles 2 dim, balls dim + 1, orthants dim.
  int vc_dimension() const noexcept;
};

/// Closed axis-aligned box; empty when lo_k > hi_k on some axis.
struct RectangleSet {
  std::vector<double> lo;
  std::vector<double> hi;
};
struct BallSet {
  std::vector<double> center;
  double radius = 0.0;
};
struct OrthantSet {
  std::vector<double> corner;
};
using SetParams = std::variant<RectangleSet, BallSet, OrthantSet>;

bool contains(const SetParams& set, std::span<const double> point);
std::string describe(const SetParams& set);
std::string to_string(FamilyKind kind);
FamilyKind parse_family(const std::string& text);

/// Attribute points w_i = (z_i, a_i), one row of length d + 1 per patch.
std::vector<std::vector<double>> attribute_points(const Landscape& landscape);

/// n^{-1} sum_i values_i 1[(z_i, a_i) in B].
double measure_mass(std::span<const double> values, const Landscape& landscape, const SetParams& set);

/// Total variation distance between the empirical occupancy measure of X and
/// the measure carried by p: max(n^{-1} sum_{X_i=1} (1 - p_i), n^{-1} sum_{X_i=0} p_i).
double tv_distance(std::span<const std::uint8_t> x, std::span<const double> p);

/// Supremum over all subsets for general vectors: n^{-1} max(sum of positive
/// parts of a - b, sum of negative parts).
double tv_distance(std::span<const double> a, std::span<const double> b);

struct DiscrepancyReport {
  double sup = 0.0;
  SetParams witness;
  FamilyKind kind = FamilyKind::Rectangles;
  /// False when the value is a lower bound from a finite candidate set.
  bool exact = true;
};

/// Precomputed geometry for repeated discrepancy scans over one point set.
/// Axes on which all points agree are dropped (every set of the family then
/// contains all or none of the points along that axis), so e.g. equal weights
/// cost nothing. Rectangles and orthants are exact up to two effective axes,
/// balls up to one; beyond that the result is a lower bound and flagged.
class DiscrepancyScanner {
 public:
  DiscrepancyScanner(std::vector<std::vector<double>> points, VCFamily family);

  /// sup over the family of |n^{-1} sum_i diff_i 1[w_i in B]|.
  DiscrepancyReport scan(std::span<const double> diff) const;

  std::size_t effective_dim() const noexcept { return active_.size(); }
  bool exact() const noexcept;

 private:
  struct Axis {
    std::size_t coordinate;
    std::vector<double> values;       // sorted distinct
    std::vector<std::uint32_t> rank;  // per point
  };

  DiscrepancyReport scan_rectangles(std::span<const double> diff) const;
  DiscrepancyReport scan_orthants(std::span<const double> diff) const;
  DiscrepancyReport scan_balls(std::span<const double> diff) const;

  double best_rectangle_2d(std::span<const double> diff, const Axis& u, const Axis& v, RectangleSet& witness) const;

  RectangleSet full_box() const;
  RectangleSet empty_box() const;

  std::vector<std::vector<double>> points_;
  VCFamily family_;
  std::vector<Axis> active_;
  std::vector<double> lower_, upper_;
};

/// sup_{B in F} |n^{-1} sum_i (a_i - b_i) 1[(z_i, a_i) in B]|.
DiscrepancyReport sup_discrepancy(std::span<const double> values_a, std::span<const double> values_b,
                                  const Landscape& landscape, const VCFamily& family);

struct ShatterBound {
  std::uint64_t value = 0;
  bool saturated = false;
};

/// Sauer bound (n + 1)^V with saturating arithmetic.
ShatterBound shatter_bound(int vc_dimension, std::uint64_t n);

/// min(1, 2 exp(-2 n eps^2 / G_n^2)), G_n^2 = n^{-1} sum_i g_i^2; 0 for all-zero g.
double hoeffding_tail(std::span<const double> g, double eps, std::size_t n);

/// min(1, 2 (n + 1)^V exp(-2 n eps^2)), evaluated in log space.
double vc_deviation_bound(int vc_dimension, std::size_t n, double eps);

}  // namespace metapop
