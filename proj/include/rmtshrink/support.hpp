#pragma once

#include <vector>

#include "rmtshrink/spectrum.hpp"
#include "rmtshrink/stieltjes.hpp"

namespace rmtshrink {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Numerical support {x : v(x) > v_floor} of H boxplus semicircle(sigma^2),
/// found by scanning [min H - 2 sigma, max H + 2 sigma] and bisecting each
/// in/out transition.
class SupportMap {
 public:
  SupportMap(const DiscreteSpectrum& h, double sigma, const StieltjesOptions& options = {},
             int scan_points = 2000);

  const std::vector<Interval>& intervals() const noexcept { return intervals_; }

  bool contains(double x) const;

  /// x itself when inside, otherwise the closest in-support edge point.
  double nearest(double x) const;

 private:
  std::vector<Interval> intervals_;
};

}  // namespace rmtshrink
