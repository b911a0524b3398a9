#include "metapop/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "metapop/error.hpp"

namespace metapop {

namespace {

// Node of a segment tree answering best nonempty contiguous sums (and
// nonempty prefix sums) over compressed coordinates.
struct Node {
  double sum = 0.0;
  double pmax = 0.0, pmin = 0.0;
  double smax = 0.0, smin = 0.0;
  double bmax = 0.0, bmin = 0.0;
  bool empty = true;
};

Node leaf(double v) { return {v, v, v, v, v, v, v, false}; }

Node merge(const Node& l, const Node& r) {
  if (l.empty) return r;
  if (r.empty) return l;
  Node out;
  out.empty = false;
  out.sum = l.sum + r.sum;
  out.pmax = std::max(l.pmax, l.sum + r.pmax);
  out.pmin = std::min(l.pmin, l.sum + r.pmin);
  out.smax = std::max(r.smax, r.sum + l.smax);
  out.smin = std::min(r.smin, r.sum + l.smin);
  out.bmax = std::max({l.bmax, r.bmax, l.smax + r.pmax});
  out.bmin = std::min({l.bmin, r.bmin, l.smin + r.pmin});
  return out;
}

class SegmentTree {
 public:
  explicit SegmentTree(std::size_t count) : count_(count) {
    size_ = 1;
    while (size_ < count) size_ <<= 1;
    nodes_.resize(2 * size_);
    reset();
  }

  void reset() {
    std::fill(nodes_.begin(), nodes_.end(), Node{});
    for (std::size_t i = 0; i < count_; ++i) nodes_[size_ + i] = leaf(0.0);
    for (std::size_t k = size_ - 1; k >= 1; --k) nodes_[k] = merge(nodes_[2 * k], nodes_[2 * k + 1]);
  }

  void add(std::size_t i, double v) {
    std::size_t k = size_ + i;
    nodes_[k] = leaf(nodes_[k].sum + v);
    for (k >>= 1; k >= 1; k >>= 1) nodes_[k] = merge(nodes_[2 * k], nodes_[2 * k + 1]);
  }

  const Node& root() const { return nodes_[1]; }

 private:
  std::size_t count_;
  std::size_t size_;
  std::vector<Node> nodes_;
};

struct Interval {
  double value = 0.0;
  std::size_t lo = 0, hi = 0;
};

// Kadane's algorithm; the first interval attaining the optimum wins.
Interval best_interval(const std::vector<double>& g, bool maximise) {
  Interval best{maximise ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity(), 0, 0};
  double run = 0.0;
  std::size_t start = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const bool restart = k == 0 || (maximise ? run < 0.0 : run > 0.0);
    if (restart) {
      run = g[k];
      start = k;
    } else {
      run += g[k];
    }
    if (maximise ? run > best.value : run < best.value) best = {run, start, k};
  }
  return best;
}

// Largest |prefix sum|, returning the prefix end index.
Interval best_prefix(const std::vector<double>& g) {
  Interval best{0.0, 0, 0};
  double run = 0.0;
  bool found = false;
  for (std::size_t k = 0; k < g.size(); ++k) {
    run += g[k];
    if (!found || std::abs(run) > std::abs(best.value)) {
      best = {run, 0, k};
      found = true;
    }
  }
  return best;
}

}  // namespace

int VCFamily::vc_dimension() const noexcept {
  switch (kind) {
    case FamilyKind::Rectangles:
      return 2 * dim;
    case FamilyKind::Balls:
      return dim + 1;
    case FamilyKind::HalfLines:
      return dim;
  }
  return 0;
}

bool contains(const SetParams& set, std::span<const double> point) {
  if (const auto* r = std::get_if<RectangleSet>(&set)) {
    if (r->lo.size() != point.size() || r->hi.size() != point.size()) throw Error("rectangle dimension mismatch");
    for (std::size_t k = 0; k < point.size(); ++k) {
      if (point[k] < r->lo[k] || point[k] > r->hi[k]) return false;
    }
    return true;
  }
  if (const auto* b = std::get_if<BallSet>(&set)) {
    if (b->center.size() != point.size()) throw Error("ball dimension mismatch");
    return distance(b->center, point) <= b->radius;
  }
  const auto& o = std::get<OrthantSet>(set);
  if (o.corner.size() != point.size()) throw Error("orthant dimension mismatch");
  for (std::size_t k = 0; k < point.size(); ++k) {
    if (point[k] > o.corner[k]) return false;
  }
  return true;
}

std::string describe(const SetParams& set) {
  std::ostringstream out;
  out.precision(17);
  auto list = [&](const std::vector<double>& v) {
    out << '[';
    for (std::size_t k = 0; k < v.size(); ++k) out << (k ? "," : "") << v[k];
    out << ']';
  };
  if (const auto* r = std::get_if<RectangleSet>(&set)) {
    out << "rectangle lo=";
    list(r->lo);
    out << " hi=";
    list(r->hi);
  } else if (const auto* b = std::get_if<BallSet>(&set)) {
    out << "ball center=";
    list(b->center);
    out << " radius=" << b->radius;
  } else {
    out << "orthant corner=";
    list(std::get<OrthantSet>(set).corner);
  }
  return out.str();
}

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::Rectangles:
      return "rectangles";
    case FamilyKind::Balls:
      return "balls";
    case FamilyKind::HalfLines:
      return "halflines";
  }
  return "?";
}

FamilyKind parse_family(const std::string& text) {
  if (text == "rectangles" || text == "rect") return FamilyKind::Rectangles;
  if (text == "balls" || text == "ball") return FamilyKind::Balls;
  if (text == "halflines" || text == "orthants") return FamilyKind::HalfLines;
  throw Error("unknown set family '" + text + "'");
}

std::vector<std::vector<double>> attribute_points(const Landscape& landscape) {
  std::vector<std::vector<double>> out;
  out.reserve(landscape.size());
  for (const auto& p : landscape.patches()) {
    auto w = p.z;
    w.push_back(p.a);
    out.push_back(std::move(w));
  }
  return out;
}

double measure_mass(std::span<const double> values, const Landscape& landscape, const SetParams& set) {
  const std::size_t n = landscape.size();
  if (values.size() != n) throw Error("measure_mass: length mismatch");
  std::vector<double> w(static_cast<std::size_t>(landscape.dimension()) + 1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = landscape.patch(i);
    std::copy(p.z.begin(), p.z.end(), w.begin());
    w.back() = p.a;
    if (contains(set, w)) total += values[i];
  }
  return total / static_cast<double>(n);
}

double tv_distance(std::span<const std::uint8_t> x, std::span<const double> p) {
  if (x.size() != p.size()) throw Error("tv_distance: length mismatch");
  if (x.empty()) return 0.0;
  double over = 0.0, under = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i]) {
      over += 1.0 - p[i];
    } else {
      under += p[i];
    }
  }
  return std::max(over, under) / static_cast<double>(x.size());
}

double tv_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("tv_distance: length mismatch");
  if (a.empty()) return 0.0;
  double pos = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d > 0.0) {
      pos += d;
    } else {
      neg -= d;
    }
  }
  return std::max(pos, neg) / static_cast<double>(a.size());
}

DiscrepancyScanner::DiscrepancyScanner(std::vector<std::vector<double>> points, VCFamily family)
    : points_(std::move(points)), family_(family) {
  if (family_.dim < 1) throw Error("set family dimension must be positive");
  const auto dim = static_cast<std::size_t>(family_.dim);
  lower_.assign(dim, std::numeric_limits<double>::infinity());
  upper_.assign(dim, -std::numeric_limits<double>::infinity());
  for (const auto& w : points_) {
    if (w.size() != dim) throw Error("point dimension does not match the set family");
    for (std::size_t k = 0; k < dim; ++k) {
      if (!std::isfinite(w[k])) throw Error("non-finite attribute coordinate");
      lower_[k] = std::min(lower_[k], w[k]);
      upper_[k] = std::max(upper_[k], w[k]);
    }
  }
  if (points_.empty()) return;
  for (std::size_t k = 0; k < dim; ++k) {
    if (lower_[k] == upper_[k]) continue;
    Axis axis{k, {}, {}};
    axis.values.reserve(points_.size());
    for (const auto& w : points_) axis.values.push_back(w[k]);
    std::sort(axis.values.begin(), axis.values.end());
    axis.values.erase(std::unique(axis.values.begin(), axis.values.end()), axis.values.end());
    axis.rank.reserve(points_.size());
    for (const auto& w : points_) {
      axis.rank.push_back(
          static_cast<std::uint32_t>(std::lower_bound(axis.values.begin(), axis.values.end(), w[k]) - axis.values.begin()));
    }
    active_.push_back(std::move(axis));
  }
}

bool DiscrepancyScanner::exact() const noexcept {
  return family_.kind == FamilyKind::Balls ? active_.size() <= 1 : active_.size() <= 2;
}

RectangleSet DiscrepancyScanner::full_box() const { return {lower_, upper_}; }

RectangleSet DiscrepancyScanner::empty_box() const {
  // lo > hi on the first axis
  RectangleSet r{std::vector<double>(lower_.size(), 0.0), std::vector<double>(lower_.size(), 0.0)};
  if (!r.lo.empty()) {
    r.lo[0] = 1.0;
    r.hi[0] = 0.0;
  }
  return r;
}

DiscrepancyReport DiscrepancyScanner::scan(std::span<const double> diff) const {
  if (diff.size() != points_.size()) throw Error("discrepancy scan: length mismatch");
  for (double d : diff) {
    if (!std::isfinite(d)) throw Error("discrepancy scan: non-finite value");
  }
  DiscrepancyReport report;
  switch (family_.kind) {
    case FamilyKind::Rectangles:
      report = scan_rectangles(diff);
      break;
    case FamilyKind::HalfLines:
      report = scan_orthants(diff);
      break;
    case FamilyKind::Balls:
      report = scan_balls(diff);
      break;
  }
  report.kind = family_.kind;
  report.exact = exact();
  return report;
}

double DiscrepancyScanner::best_rectangle_2d(std::span<const double> diff, const Axis& u, const Axis& v,
                                             RectangleSet& witness) const {
  const std::size_t n = points_.size();
  const std::size_t nu = u.values.size(), nv = v.values.size();
  std::vector<std::vector<std::size_t>> by_v(nv);
  for (std::size_t i = 0; i < n; ++i) by_v[v.rank[i]].push_back(i);

  SegmentTree tree(nu);
  double best = 0.0;
  bool positive = true;
  std::size_t best_b = 0, best_t = 0;
  bool found = false;
  for (std::size_t b = 0; b < nv; ++b) {
    if (b > 0) tree.reset();
    for (std::size_t t = b; t < nv; ++t) {
      for (std::size_t i : by_v[t]) tree.add(u.rank[i], diff[i]);
      const Node& root = tree.root();
      if (root.bmax > best) {
        best = root.bmax;
        positive = true;
        best_b = b;
        best_t = t;
        found = true;
      }
      if (-root.bmin > best) {
        best = -root.bmin;
        positive = false;
        best_b = b;
        best_t = t;
        found = true;
      }
    }
  }
  if (!found) return 0.0;

  std::vector<double> g(nu, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (v.rank[i] >= best_b && v.rank[i] <= best_t) g[u.rank[i]] += diff[i];
  }
  const Interval iv = best_interval(g, positive);
  witness = full_box();
  witness.lo[u.coordinate] = u.values[iv.lo];
  witness.hi[u.coordinate] = u.values[iv.hi];
  witness.lo[v.coordinate] = v.values[best_b];
  witness.hi[v.coordinate] = v.values[best_t];
  return best;
}

DiscrepancyReport DiscrepancyScanner::scan_rectangles(std::span<const double> diff) const {
  const double inv_n = points_.empty() ? 0.0 : 1.0 / static_cast<double>(points_.size());
  DiscrepancyReport report;
  report.witness = empty_box();
  double best = 0.0;

  if (active_.empty()) {
    const double total = std::accumulate(diff.begin(), diff.end(), 0.0);
    if (std::abs(total) > 0.0) {
      best = std::abs(total);
      report.witness = full_box();
    }
  } else if (active_.size() == 1) {
    const Axis& u = active_[0];
    std::vector<double> g(u.values.size(), 0.0);
    for (std::size_t i = 0; i < points_.size(); ++i) g[u.rank[i]] += diff[i];
    const Interval hi = best_interval(g, true);
    const Interval lo = best_interval(g, false);
    const Interval* pick = nullptr;
    if (hi.value > best) {
      best = hi.value;
      pick = &hi;
    }
    if (-lo.value > best) {
      best = -lo.value;
      pick = &lo;
    }
    if (pick) {
      RectangleSet r = full_box();
      r.lo[u.coordinate] = u.values[pick->lo];
      r.hi[u.coordinate] = u.values[pick->hi];
      report.witness = r;
    }
  } else {
    // Exact for two axes; with more, every pair of axes is scanned exactly
    // with the remaining axes left unconstrained.
    for (std::size_t a = 0; a < active_.size(); ++a) {
      for (std::size_t b = a + 1; b < active_.size(); ++b) {
        RectangleSet r;
        const double value = best_rectangle_2d(diff, active_[a], active_[b], r);
        if (value > best) {
          best = value;
          report.witness = r;
        }
      }
    }
    if (active_.size() > 2 && points_.size() <= 300) {
      // Boxes spanned by pairs of points.
      const std::size_t n = points_.size();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
          RectangleSet r = full_box();
          for (const auto& ax : active_) {
            r.lo[ax.coordinate] = std::min(points_[i][ax.coordinate], points_[j][ax.coordinate]);
            r.hi[ax.coordinate] = std::max(points_[i][ax.coordinate], points_[j][ax.coordinate]);
          }
          double total = 0.0;
          for (std::size_t q = 0; q < n; ++q) {
            if (contains(r, points_[q])) total += diff[q];
          }
          if (std::abs(total) > best) {
            best = std::abs(total);
            report.witness = r;
          }
        }
      }
    }
  }
  report.sup = best * inv_n;
  return report;
}

DiscrepancyReport DiscrepancyScanner::scan_orthants(std::span<const double> diff) const {
  const std::size_t n = points_.size();
  const double inv_n = n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
  DiscrepancyReport report;
  // An orthant below every point is empty.
  OrthantSet none{lower_};
  for (auto& c : none.corner) c = std::nextafter(c, -std::numeric_limits<double>::infinity());
  report.witness = none;
  double best = 0.0;

  auto consider = [&](double total, const OrthantSet& o) {
    if (std::abs(total) > best) {
      best = std::abs(total);
      report.witness = o;
    }
  };

  if (active_.empty()) {
    consider(std::accumulate(diff.begin(), diff.end(), 0.0), OrthantSet{upper_});
  } else if (active_.size() == 1) {
    const Axis& u = active_[0];
    std::vector<double> g(u.values.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) g[u.rank[i]] += diff[i];
    const Interval pre = best_prefix(g);
    OrthantSet o{upper_};
    o.corner[u.coordinate] = u.values[pre.hi];
    consider(pre.value, o);
  } else {
    for (std::size_t a = 0; a < active_.size(); ++a) {
      for (std::size_t b = a + 1; b < active_.size(); ++b) {
        const Axis& u = active_[a];
        const Axis& v = active_[b];
        std::vector<std::vector<std::size_t>> by_u(u.values.size());
        for (std::size_t i = 0; i < n; ++i) by_u[u.rank[i]].push_back(i);
        SegmentTree tree(v.values.size());
        double pair_best = 0.0;
        bool positive = true;
        std::size_t best_g = 0;
        bool found = false;
        for (std::size_t g = 0; g < by_u.size(); ++g) {
          for (std::size_t i : by_u[g]) tree.add(v.rank[i], diff[i]);
          const Node& root = tree.root();
          if (root.pmax > pair_best) {
            pair_best = root.pmax;
            positive = true;
            best_g = g;
            found = true;
          }
          if (-root.pmin > pair_best) {
            pair_best = -root.pmin;
            positive = false;
            best_g = g;
            found = true;
          }
        }
        if (!found || pair_best <= best) continue;
        std::vector<double> col(v.values.size(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          if (u.rank[i] <= best_g) col[v.rank[i]] += diff[i];
        }
        double run = 0.0, target = positive ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        std::size_t at = 0;
        for (std::size_t k = 0; k < col.size(); ++k) {
          run += col[k];
          if (positive ? run > target : run < target) {
            target = run;
            at = k;
          }
        }
        OrthantSet o{upper_};
        o.corner[u.coordinate] = u.values[best_g];
        o.corner[v.coordinate] = v.values[at];
        consider(target, o);
      }
    }
    if (active_.size() > 2) {
      for (std::size_t c = 0; c < n; ++c) {
        OrthantSet o{points_[c]};
        double total = 0.0;
        for (std::size_t q = 0; q < n; ++q) {
          if (contains(o, points_[q])) total += diff[q];
        }
        consider(total, o);
      }
    }
  }
  report.sup = best * inv_n;
  return report;
}

DiscrepancyReport DiscrepancyScanner::scan_balls(std::span<const double> diff) const {
  const std::size_t n = points_.size();
  const double inv_n = n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
  DiscrepancyReport report;
  report.witness = BallSet{std::vector<double>(lower_.size(), 0.0), -1.0};
  double best = 0.0;

  if (active_.empty()) {
    const double total = std::accumulate(diff.begin(), diff.end(), 0.0);
    if (std::abs(total) > 0.0) {
      best = std::abs(total);
      report.witness = BallSet{points_[0], 0.0};
    }
  } else if (active_.size() == 1) {
    // On a line, balls cut out exactly the closed intervals.
    const Axis& u = active_[0];
    std::vector<double> g(u.values.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) g[u.rank[i]] += diff[i];
    const Interval hi = best_interval(g, true);
    const Interval lo = best_interval(g, false);
    const Interval* pick = nullptr;
    if (hi.value > best) {
      best = hi.value;
      pick = &hi;
    }
    if (-lo.value > best) {
      best = -lo.value;
      pick = &lo;
    }
    if (pick) {
      const double a = u.values[pick->lo], b = u.values[pick->hi];
      const double mid = 0.5 * (a + b);
      BallSet ball{points_[0], std::max(mid - a, b - mid)};
      ball.center[u.coordinate] = mid;
      report.witness = ball;
    }
  } else {
    // Balls centred at data points with radii at data distances.
    std::vector<std::pair<double, std::size_t>> order(n);
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t q = 0; q < n; ++q) order[q] = {distance(points_[c], points_[q]), q};
      std::sort(order.begin(), order.end());
      double run = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        run += diff[order[k].second];
        if (k + 1 < n && order[k + 1].first == order[k].first) continue;
        if (std::abs(run) > best) {
          best = std::abs(run);
          report.witness = BallSet{points_[c], order[k].first};
        }
      }
    }
  }
  report.sup = best * inv_n;
  return report;
}

DiscrepancyReport sup_discrepancy(std::span<const double> values_a, std::span<const double> values_b,
                                  const Landscape& landscape, const VCFamily& family) {
  const std::size_t n = landscape.size();
  if (values_a.size() != n || values_b.size() != n) throw Error("sup_discrepancy: length mismatch");
  if (family.dim != landscape.dimension() + 1) {
    throw Error("set family dimension must equal the location dimension plus one");
  }
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = values_a[i] - values_b[i];
  return DiscrepancyScanner(attribute_points(landscape), family).scan(diff);
}

ShatterBound shatter_bound(int vc_dimension, std::uint64_t n) {
  if (vc_dimension < 0) throw Error("VC dimension must be non-negative");
  ShatterBound out{1, false};
  const std::uint64_t base = n + 1;
  const std::uint64_t cap = std::numeric_limits<std::uint64_t>::max();
  for (int k = 0; k < vc_dimension; ++k) {
    if (base != 0 && out.value > cap / base) {
      out.value = cap;
      out.saturated = true;
      return out;
    }
    out.value *= base;
  }
  return out;
}

double hoeffding_tail(std::span<const double> g, double eps, std::size_t n) {
  if (n == 0) throw Error("hoeffding_tail: n must be positive");
  if (!(eps >= 0.0)) throw Error("hoeffding_tail: eps must be non-negative");
  double sq = 0.0;
  for (double v : g) sq += v * v;
  const double g2 = sq / static_cast<double>(n);
  if (g2 == 0.0) return 0.0;
  return std::min(1.0, 2.0 * std::exp(-2.0 * static_cast<double>(n) * eps * eps / g2));
}

double vc_deviation_bound(int vc_dimension, std::size_t n, double eps) {
  if (n == 0) throw Error("vc_deviation_bound: n must be positive");
  const double log_bound = std::log(2.0) + vc_dimension * std::log(static_cast<double>(n) + 1.0) -
                           2.0 * static_cast<double>(n) * eps * eps;
  return log_bound >= 0.0 ? 1.0 : std::exp(log_bound);
}

}  // namespace metapop
