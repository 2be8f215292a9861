#include "rmtshrink/support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rmtshrink/errors.hpp"

namespace rmtshrink {

SupportMap::SupportMap(const DiscreteSpectrum& h, double sigma, const StieltjesOptions& options,
                       int scan_points) {
  if (!(sigma > 0.0)) throw ValidationError("SupportMap: sigma must be > 0");
  if (scan_points < 2) throw ValidationError("SupportMap: need at least 2 scan points");

  auto inside = [&](double x) {
    try {
      return in_support(boundary_uv(h, sigma, x, options), options);
    } catch (const NumericalError&) {
      return false;
    }
  };

  const double lo = h.min() - 2.05 * sigma;
  const double hi = h.max() + 2.05 * sigma;
  std::vector<double> xs;
  xs.reserve(static_cast<std::size_t>(scan_points) + h.size());
  for (int i = 0; i < scan_points; ++i) {
    xs.push_back(lo + (hi - lo) * static_cast<double>(i) / (scan_points - 1));
  }
  // Narrow bumps (small sigma) can fall between scan points; atoms seed them.
  xs.insert(xs.end(), h.values().begin(), h.values().end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  std::vector<char> flags(xs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(xs.size()); ++i) {
    flags[static_cast<std::size_t>(i)] = inside(xs[static_cast<std::size_t>(i)]) ? 1 : 0;
  }

  // Returns the in-support end of [a, b] after bisection; `a_inside` tells
  // which end is in the support.
  auto edge = [&](double a, double b, bool a_inside) {
    double in = a_inside ? a : b;
    double out = a_inside ? b : a;
    for (int it = 0; it < 60 && std::abs(in - out) > 1e-13 * (1.0 + std::abs(in)); ++it) {
      const double mid = 0.5 * (in + out);
      (inside(mid) ? in : out) = mid;
    }
    return in;
  };

  bool open = false;
  double start = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const bool f = flags[i] != 0;
    if (f && !open) {
      start = i == 0 ? xs[0] : edge(xs[i], xs[i - 1], true);
      open = true;
    } else if (!f && open) {
      intervals_.push_back({start, edge(xs[i - 1], xs[i], true)});
      open = false;
    }
  }
  if (open) intervals_.push_back({start, xs.back()});
  if (intervals_.empty()) {
    throw NumericalError("SupportMap: no point with v > v_floor found");
  }
}

bool SupportMap::contains(double x) const {
  return std::any_of(intervals_.begin(), intervals_.end(),
                     [x](const Interval& iv) { return iv.lo <= x && x <= iv.hi; });
}

double SupportMap::nearest(double x) const {
  if (contains(x)) return x;
  double best = intervals_.front().lo;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const Interval& iv : intervals_) {
    for (double e : {iv.lo, iv.hi}) {
      if (std::abs(e - x) < best_dist) {
        best_dist = std::abs(e - x);
        best = e;
      }
    }
  }
  return best;
}

}  // namespace rmtshrink
